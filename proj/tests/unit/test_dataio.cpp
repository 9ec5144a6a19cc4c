#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"

using namespace shadowlab;

namespace {

SampleRecord record(std::size_t i) {
  SampleRecord r;
  r.id = format_id(i);
  r.shadow_path = "shadow/" + r.id + ".png";
  r.gt_path = "gt/" + r.id + ".png";
  r.mask_path = "mask/" + r.id + ".png";
  return r;
}

std::vector<SampleRecord> records(std::size_t n) {
  std::vector<SampleRecord> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(record(i));
  return v;
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("quantize rounds half away from zero and clamps") {
    CHECK(quantize(1.0f) == 255);
    CHECK(quantize(0.0f) == 0);
    CHECK(quantize(0.5f) == 128);
    CHECK(quantize(-0.2f) == 0);
    CHECK(quantize(1.7f) == 255);
    CHECK(quantize(10.0f / 255.0f) == 10);
  }

  TEST_CASE("png round trip is within half a level") {
    fixtures::TempDir dir("png");
    for (int c : {1, 3}) {
      const Image img = fixtures::random_image(9, 14, c, 40 + c);
      const auto path = dir.path() / ("img" + std::to_string(c) + ".png");
      write_image(path, img);
      const Image back = read_image(path);
      REQUIRE(back.same_shape(img));
      for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.samples()[i] - img.samples()[i]) <= 1.0 / 510.0 + 1e-7);
      CHECK(read_image(path) == back);
    }
  }

  TEST_CASE("reading a missing or corrupt file raises IoError naming it") {
    fixtures::TempDir dir("bad");
    write_text_file(dir.path() / "junk.png", "not a png");
    for (const char* name : {"missing.png", "junk.png"}) {
      try {
        read_image(dir.path() / name);
        FAIL("expected IoError");
      } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(name) != std::string::npos);
      }
    }
  }

  TEST_CASE("split sizes follow 12:3:1") {
    CHECK(split_sizes(16) == SplitCounts{12, 3, 1});
    CHECK(split_sizes(32) == SplitCounts{24, 6, 2});
    CHECK(split_sizes(17) == SplitCounts{13, 3, 1});
    CHECK(split_sizes(0) == SplitCounts{0, 0, 0});
    for (std::size_t n = 1; n < 100; ++n) {
      const SplitCounts c = split_sizes(n);
      CHECK(c.train + c.valid + c.test == n);
    }
  }

  TEST_CASE("split_dataset: deterministic permutation with grouped splits") {
    const DatasetManifest a = split_dataset(records(16), 9);
    const DatasetManifest b = split_dataset(records(16), 9);
    CHECK(a == b);
    CHECK(a.counts() == SplitCounts{12, 3, 1});
    CHECK(a.matches_ratio());
    std::set<std::string> ids;
    for (const auto& r : a.records) ids.insert(r.id);
    CHECK(ids.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) {
      const Split want = i < 12 ? Split::Train : (i < 15 ? Split::Valid : Split::Test);
      CHECK(a.records[i].split == want);
    }
    CHECK(a.in_split(Split::Valid).size() == 3);
  }

  TEST_CASE("manifest text round trip, with and without params") {
    DatasetManifest m = split_dataset(records(5), 3);
    SynthParams p;
    p.weight = 0.37;
    p.color = {0.1, 0.2, 0.3};
    p.mode = CompositeMode::Attenuated;
    p.gt_transform.rotation_deg = 12.5;
    p.gt_transform.scale = 1.1;
    p.mask_transform.out_height = p.mask_transform.out_width = 64;
    p.seed = 0xfeedfacecafebeefULL;
    p.gt_source = 2;
    p.template_source = 7;
    m.records[1].params = p;
    const DatasetManifest back = parse_manifest(serialize_manifest(m));
    CHECK(back == m);
    CHECK_THROWS_AS(parse_manifest("{\"version\": \"other/9\", \"records\": []}"), ValidationError);
    CHECK_THROWS(parse_manifest("{"));
  }

  TEST_CASE("load_manifest checks referenced files") {
    fixtures::TempDir dir("manifest");
    DatasetManifest m = split_dataset(records(2), 1);
    save_manifest(dir.path(), m);
    CHECK_THROWS(load_manifest(dir.path()));
    for (const auto& r : m.records)
      for (const auto& p : {r.shadow_path, r.gt_path, r.mask_path}) write_image(dir.path() / p, Image(4, 4, 1, 0.5f));
    CHECK(load_manifest(dir.path()) == m);
    const LoadedSample s = load_sample(dir.path(), m.records[0]);
    CHECK(s.gt.at(0, 0) == doctest::Approx(128.0 / 255.0));
  }

  TEST_CASE("enum parsing") {
    CHECK(parse_split("valid") == Split::Valid);
    CHECK(std::string(to_string(Split::Test)) == "test");
    CHECK(parse_composite_mode("attenuated") == CompositeMode::Attenuated);
    CHECK_THROWS_AS(parse_split("dev"), ValidationError);
    CHECK_THROWS_AS(parse_composite_mode("mul"), ValidationError);
  }
}
