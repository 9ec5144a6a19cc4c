#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/synth.hpp"

using namespace shadowlab;

namespace {

SoftMask random_mask(int h, int w, std::uint64_t seed) { return SoftMask(fixtures::random_image(h, w, 1, seed)); }

float eq1_literal(double a, double sf, double m, double c) {
  return static_cast<float>(std::clamp(a * sf + (1.0 - a) * m * c, 0.0, 1.0));
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("composite_shadow: endpoints") {
    const Image gt = fixtures::random_image(8, 8, 3, 1);
    const SoftMask mask = random_mask(8, 8, 2);
    const ShadowColor color{0.1, 0.4, 0.3};
    CHECK(composite_shadow(gt, mask, 1.0, color, CompositeMode::Literal) == gt);
    CHECK(composite_shadow(gt, mask, 1.0, color, CompositeMode::Attenuated) == gt);

    const Image flat = composite_shadow(gt, SoftMask(Image(8, 8, 1, 1.0f)), 0.0, color, CompositeMode::Literal);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) CHECK(flat.at(y, x, c) == static_cast<float>(color[c]));
  }

  TEST_CASE("composite_shadow: literal mode matches a scalar loop") {
    const Image gt = fixtures::random_image(8, 8, 3, 3);
    const SoftMask mask = random_mask(8, 8, 4);
    const ShadowColor color{0.25, 0.5, 0.125};
    const Image out = composite_shadow(gt, mask, 0.5, color, CompositeMode::Literal);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == eq1_literal(0.5, gt.at(y, x, c), mask.at(y, x), color[c]));
  }

  TEST_CASE("composite_shadow: mask zero behaviour in both modes") {
    const Image gt = fixtures::random_image(6, 6, 3, 5);
    const SoftMask zero = SoftMask::zeros(6, 6);
    const ShadowColor color{0.3, 0.3, 0.3};
    CHECK(composite_shadow(gt, zero, 0.4, color, CompositeMode::Attenuated) == gt);
    const Image lit = composite_shadow(gt, zero, 0.4, color, CompositeMode::Literal);
    for (std::size_t i = 0; i < gt.size(); ++i)
      CHECK(lit.samples()[i] == static_cast<float>(0.4 * static_cast<double>(gt.samples()[i])));
  }

  TEST_CASE("composite_shadow: attenuated darkens and literal adds with the mask") {
    const Image gt(1, 1, 3, 0.8f);
    const ShadowColor color{0.2, 0.1, 0.3};
    float att[3] = {2.0f, 2.0f, 2.0f}, lit[3] = {-1.0f, -1.0f, -1.0f};
    for (int k = 0; k <= 10; ++k) {
      const SoftMask m(Image(1, 1, 1, k / 10.0f));
      const Image a = composite_shadow(gt, m, 0.6, color, CompositeMode::Attenuated);
      const Image l = composite_shadow(gt, m, 0.6, color, CompositeMode::Literal);
      for (int c = 0; c < 3; ++c) {
        CHECK(a.at(0, 0, c) <= att[c]);
        CHECK(l.at(0, 0, c) >= lit[c]);
        att[c] = a.at(0, 0, c);
        lit[c] = l.at(0, 0, c);
      }
    }
  }

  TEST_CASE("composite_shadow: shape mismatch is rejected") {
    CHECK_THROWS_AS(composite_shadow(Image(4, 4, 3), SoftMask::zeros(4, 5), 0.5, ShadowColor{}, CompositeMode::Literal),
                    InvalidInput);
  }

  TEST_CASE("prepare_template: zero template, identity, determinism") {
    AffineParams id;
    id.out_height = id.out_width = 32;
    CHECK(prepare_template(Image(32, 32, 1, 0.0f), id) == SoftMask::zeros(32, 32));

    // One pixel per bin: bin k holds (k + 0.5) / 256, so the fraction at or below it is (k + 1) / 256.
    Image eq(16, 16, 1);
    for (int k = 0; k < 256; ++k) eq.at(k / 16, k % 16) = static_cast<float>((k + 0.5) / 256.0);
    AffineParams id16 = id;
    id16.out_height = id16.out_width = 16;
    const SoftMask m = prepare_template(eq, id16);
    for (int k = 0; k < 256; ++k) CHECK(std::abs(m.at(k / 16, k % 16) - (k + 1) / 256.0) <= 1e-6);

    const Image tpl = make_toy_shadow_template(48, 48, 9);
    AffineParams rot = id;
    rot.rotation_deg = 33.0;
    rot.scale = 1.2;
    CHECK(prepare_template(tpl, rot) == prepare_template(tpl, rot));
  }

  TEST_CASE("color_histogram: constant image, conservation, hand-binned pixels") {
    const auto constant = color_histogram(Image(5, 7, 3, 0.4f), 256);
    for (const auto& h : constant) {
      CHECK(h.total() == 35);
      CHECK(std::count_if(h.counts.begin(), h.counts.end(), [](std::size_t c) { return c > 0; }) == 1);
    }

    const auto rnd = color_histogram(fixtures::random_image(9, 11, 3, 8), 256);
    for (const auto& h : rnd) CHECK(h.total() == 99);

    // red (H 0, S 1, V 1), green (H 1/3), blue (H 2/3), mid-gray (S 0, V 0.5); 4 bins.
    const Image px = Image::from_samples(1, 4, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1, 0.5f, 0.5f, 0.5f});
    const auto h = color_histogram(px, 4);
    CHECK(h[0].counts == std::vector<std::size_t>{2, 1, 1, 0});
    CHECK(h[1].counts == std::vector<std::size_t>{1, 0, 0, 3});
    CHECK(h[2].counts == std::vector<std::size_t>{0, 0, 1, 3});
  }

  TEST_CASE("generate_dataset: 12:3:1 split, determinism, round trip") {
    std::vector<Image> pages{make_toy_page(40, 40, 1), make_toy_page(40, 40, 2)};
    std::vector<Image> tpls{make_toy_shadow_template(40, 40, 3), make_toy_shadow_template(40, 40, 4)};
    SynthConfig cfg;
    cfg.output_size = 32;
    cfg.seed = 77;
    const SyntheticDataset a = generate_dataset(pages, tpls, cfg, 16);
    const SplitCounts c = a.manifest.counts();
    CHECK(c.train == 12);
    CHECK(c.valid == 3);
    CHECK(c.test == 1);

    const SyntheticDataset b = generate_dataset(pages, tpls, cfg, 16);
    CHECK(serialize_manifest(a.manifest) == serialize_manifest(b.manifest));
    for (std::size_t i = 0; i < 16; ++i) CHECK(a.samples[i].shadow == b.samples[i].shadow);

    for (const auto& s : a.samples) {
      REQUIRE(s.record.params.has_value());
      const SynthParams& p = *s.record.params;
      const Image gt = affine_crop(pages[p.gt_source], p.gt_transform);
      const SoftMask mask = prepare_template(tpls[p.template_source], p.mask_transform);
      CHECK(gt == s.gt);
      CHECK(mask == s.mask);
      CHECK(composite_shadow(gt, mask, p.weight, ShadowColor{p.color[0], p.color[1], p.color[2]}, p.mode) == s.shadow);
    }
  }

  TEST_CASE("generate_dataset_to_disk: missing source names the path") {
    fixtures::TempDir dir("synth");
    SynthConfig cfg;
    cfg.output_size = 16;
    try {
      generate_dataset_to_disk({dir.path() / "nope.png"}, {dir.path() / "nope.png"}, cfg, 2, dir.path() / "out");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("nope.png") != std::string::npos);
    }
  }

  TEST_CASE("config validation") {
    SynthConfig cfg;
    cfg.weight = {0.0, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = SynthConfig{};
    cfg.output_size = 8;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }
}
