#include "shadowlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "shadowlab/error.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/random.hpp"

namespace shadowlab {

namespace fs = std::filesystem;

void ShadowColor::validate() const {
  for (double v : {r, g, b}) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("ShadowColor components must lie in [0, 1]");
  }
}

void SynthConfig::validate() const {
  if (!(weight.lo > 0.0 && weight.hi < 1.0 && weight.lo <= weight.hi)) {
    throw ValidationError("synth.weight range must be a sub-interval of (0, 1)");
  }
  for (const auto& c : color) {
    if (!(c.lo >= 0.0 && c.hi <= 1.0 && c.lo <= c.hi)) {
      throw ValidationError("synth.color ranges must be sub-intervals of [0, 1]");
    }
  }
  if (output_size < 16) throw ValidationError("synth.output_size must be >= 16");
  if (!(gt_scale.lo > 0.0 && gt_scale.lo <= gt_scale.hi) || !(mask_scale.lo > 0.0 && mask_scale.lo <= mask_scale.hi)) {
    throw ValidationError("synth scale ranges must be positive and ordered");
  }
}

std::size_t Histogram::total() const noexcept {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

SoftMask prepare_template(const Image& template_img, const AffineParams& transform) {
  if (template_img.empty()) throw InvalidInput("prepare_template: empty template");
  const Image gray = template_img.channels() == 3 ? to_gray(template_img) : template_img;
  Image equalized = histogram_equalize(gray);
  auto src = gray.samples();
  auto eq = equalized.samples();
  for (std::size_t i = 0; i < eq.size(); ++i)
    if (src[i] == 0.0f) eq[i] = 0.0f;
  Image cropped = affine_crop(equalized, transform);
  cropped.clamp_unit();
  return SoftMask(std::move(cropped));
}

Image composite_shadow(const Image& gt, const SoftMask& mask, double weight, const ShadowColor& color,
                       CompositeMode mode) {
  require_channels(gt, 3, "composite_shadow");
  if (!gt.same_extent(mask.image())) throw InvalidInput("composite_shadow: gt and mask sizes differ");
  if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidInput("composite_shadow: weight must lie in [0, 1]");
  color.validate();

  Image out(gt.height(), gt.width(), 3);
  const double shade = 1.0 - weight;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      const double m = mask.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const double sf = gt.at(y, x, c);
        const double v = mode == CompositeMode::Literal ? weight * sf + shade * m * color[c]
                                                        : (1.0 - shade * m) * sf + shade * m * color[c];
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

namespace {

Image as_rgb(const Image& img) {
  if (img.channels() == 3) return img;
  Image out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x);
  return out;
}

// Offsets keep the crop center inside the region where the scaled window still fits.
AffineParams draw_transform(Engine& rng, const Interval& scale, const Interval& rotation, int src_h, int src_w,
                            int out_size) {
  AffineParams p;
  p.scale = uniform_in(rng, scale.lo, scale.hi);
  p.rotation_deg = uniform_in(rng, rotation.lo, rotation.hi);
  const double half_x = std::max(0.0, (src_w - out_size / p.scale) * 0.5);
  const double half_y = std::max(0.0, (src_h - out_size / p.scale) * 0.5);
  p.offset_x = uniform_in(rng, -half_x, half_x);
  p.offset_y = uniform_in(rng, -half_y, half_y);
  p.out_height = out_size;
  p.out_width = out_size;
  return p;
}

}  // namespace

SynthParams draw_sample_params(const SynthConfig& cfg, std::size_t index, std::size_t gt_count,
                               std::size_t template_count, int gt_height, int gt_width, int template_height,
                               int template_width) {
  SynthParams p;
  p.seed = derive_seed(cfg.seed, index);
  Engine rng(p.seed);
  p.gt_source = static_cast<std::size_t>(rng() % gt_count);
  p.template_source = static_cast<std::size_t>(rng() % template_count);
  p.weight = uniform_in(rng, cfg.weight.lo, cfg.weight.hi);
  for (int c = 0; c < 3; ++c) p.color[static_cast<std::size_t>(c)] = uniform_in(rng, cfg.color[c].lo, cfg.color[c].hi);
  p.mode = cfg.mode;
  p.gt_transform = draw_transform(rng, cfg.gt_scale, cfg.gt_rotation_deg, gt_height, gt_width, cfg.output_size);
  p.mask_transform =
      draw_transform(rng, cfg.mask_scale, cfg.mask_rotation_deg, template_height, template_width, cfg.output_size);
  return p;
}

SyntheticSample render_sample(const std::vector<Image>& gt_sources, const std::vector<Image>& template_sources,
                              const SynthParams& params, const std::string& id) {
  if (params.gt_source >= gt_sources.size() || params.template_source >= template_sources.size()) {
    throw InvalidInput("render_sample: source index out of range");
  }
  SyntheticSample s;
  s.id = id;
  s.gt = affine_crop(as_rgb(gt_sources[params.gt_source]), params.gt_transform);
  s.mask = prepare_template(template_sources[params.template_source], params.mask_transform);
  const ShadowColor color{params.color[0], params.color[1], params.color[2]};
  s.shadow = composite_shadow(s.gt, s.mask, params.weight, color, params.mode);
  s.record.id = id;
  s.record.shadow_path = "shadow/" + id + ".png";
  s.record.gt_path = "gt/" + id + ".png";
  s.record.mask_path = "mask/" + id + ".png";
  s.record.params = params;
  return s;
}

SyntheticDataset generate_dataset(const std::vector<Image>& gt_sources, const std::vector<Image>& template_sources,
                                  const SynthConfig& cfg, std::size_t count) {
  cfg.validate();
  if (gt_sources.empty() || template_sources.empty()) {
    throw InvalidInput("generate_dataset: need at least one ground-truth page and one template");
  }
  if (count == 0) throw InvalidInput("generate_dataset: count must be >= 1");

  SyntheticDataset ds;
  ds.samples.resize(count);
  parallel_for(count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Engine pick(derive_seed(cfg.seed, i));
      const std::size_t g = static_cast<std::size_t>(pick() % gt_sources.size());
      const std::size_t t = static_cast<std::size_t>(pick() % template_sources.size());
      const SynthParams p =
          draw_sample_params(cfg, i, gt_sources.size(), template_sources.size(), gt_sources[g].height(),
                             gt_sources[g].width(), template_sources[t].height(), template_sources[t].width());
      ds.samples[i] = render_sample(gt_sources, template_sources, p, format_id(i));
    }
  });

  std::vector<SampleRecord> records;
  records.reserve(count);
  for (const auto& s : ds.samples) records.push_back(s.record);
  ds.manifest = split_dataset(std::move(records), cfg.seed);
  std::sort(ds.manifest.records.begin(), ds.manifest.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < count; ++i) ds.samples[i].record = ds.manifest.records[i];
  return ds;
}

DatasetManifest generate_dataset_to_disk(const std::vector<fs::path>& gt_paths,
                                         const std::vector<fs::path>& template_paths, const SynthConfig& cfg,
                                         std::size_t count, const fs::path& root) {
  std::vector<Image> gts, templates;
  for (const auto& p : gt_paths) gts.push_back(read_image(p));
  for (const auto& p : template_paths) templates.push_back(read_image(p));
  SyntheticDataset ds = generate_dataset(gts, templates, cfg, count);
  parallel_for(ds.samples.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& s = ds.samples[i];
      write_image(root / s.record.shadow_path, s.shadow);
      write_image(root / s.record.gt_path, s.gt);
      write_image(root / s.record.mask_path, s.mask.image());
    }
  });
  save_manifest(root, ds.manifest);
  return ds.manifest;
}

std::array<Histogram, 3> color_histogram(const Image& rgb, int bins) {
  if (bins < 2) throw InvalidInput("color_histogram: bins must be >= 2");
  const Image hsv = rgb_to_hsv(rgb);
  std::array<Histogram, 3> out;
  for (int c = 0; c < 3; ++c) {
    out[static_cast<std::size_t>(c)].channel = c;
    out[static_cast<std::size_t>(c)].counts.assign(static_cast<std::size_t>(bins), 0);
  }
  auto src = hsv.samples();
  for (std::size_t i = 0; i < hsv.pixel_count(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const int b = std::min(bins - 1, static_cast<int>(src[3 * i + c] * static_cast<float>(bins)));
      ++out[c].counts[static_cast<std::size_t>(b)];
    }
  }
  return out;
}

Image make_toy_page(int height, int width, std::uint64_t seed) {
  if (height < 8 || width < 8) throw InvalidInput("make_toy_page: page must be at least 8x8");
  Engine rng = make_engine(seed, 0x9a6e);
  const double base = uniform_in(rng, 0.82, 0.97);
  const float paper[3] = {static_cast<float>(std::clamp(base + uniform_in(rng, -0.04, 0.04), 0.0, 1.0)),
                          static_cast<float>(base),
                          static_cast<float>(std::clamp(base + uniform_in(rng, -0.04, 0.04), 0.0, 1.0))};
  Image page(height, width, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) page.at(y, x, c) = paper[c];

  const int pitch = std::max(6, static_cast<int>(std::lround(height / 8.0)));
  const int stroke = std::max(2, pitch / 3);
  const int margin = std::max(1, width / 10);
  const double ink_level = uniform_in(rng, 0.05, 0.25);
  const float ink[3] = {static_cast<float>(ink_level), static_cast<float>(ink_level),
                        static_cast<float>(std::min(1.0, ink_level + uniform_in(rng, 0.0, 0.15)))};
  for (int top = margin; top + stroke <= height - margin; top += pitch) {
    int x = margin + uniform_int(rng, 0, pitch / 2);
    while (x < width - margin) {
      const int len = uniform_int(rng, pitch, 3 * pitch);
      const int end = std::min(width - margin, x + len);
      for (int y = top; y < top + stroke; ++y)
        for (int xx = x; xx < end; ++xx)
          for (int c = 0; c < 3; ++c) page.at(y, xx, c) = ink[c];
      x = end + uniform_int(rng, std::max(1, pitch / 2), pitch);
    }
  }
  return page;
}

Image make_toy_shadow_template(int height, int width, std::uint64_t seed) {
  if (height < 4 || width < 4) throw InvalidInput("make_toy_shadow_template: template must be at least 4x4");
  Engine rng = make_engine(seed, 0x5ad0);
  const double size = std::min(height, width);
  const double soft = uniform_in(rng, 0.05, 0.2) * size;
  Image tpl(height, width, 1);
  if (uniform_int(rng, 0, 1) == 0) {
    const double cy = uniform_in(rng, 0.25, 0.75) * height, cx = uniform_in(rng, 0.25, 0.75) * width;
    const double ry = uniform_in(rng, 0.2, 0.45) * size, rx = uniform_in(rng, 0.2, 0.45) * size;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        // Signed distance to the boundary, approximated in units of the mean radius.
        const double depth = (1.0 - std::sqrt(dy * dy + dx * dx)) * 0.5 * (rx + ry);
        tpl.at(y, x) = static_cast<float>(std::clamp(depth / soft, 0.0, 1.0));
      }
  } else {
    const double angle = uniform_in(rng, 0.0, 2.0 * std::numbers::pi);
    const double nx = std::cos(angle), ny = std::sin(angle);
    const double offset = uniform_in(rng, -0.25, 0.25) * size;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double depth = (x + 0.5 - width * 0.5) * nx + (y + 0.5 - height * 0.5) * ny - offset;
        tpl.at(y, x) = static_cast<float>(std::clamp(depth / soft, 0.0, 1.0));
      }
  }
  return tpl;
}

}  // namespace shadowlab
