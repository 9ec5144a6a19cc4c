#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "shadowlab/dataio.hpp"
#include "shadowlab/image.hpp"
#include "shadowlab/ssgm.hpp"

namespace shadowlab {

struct ShadowColor {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }
  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct SynthConfig {
  Interval weight{0.3, 0.9};
  std::array<Interval, 3> color{Interval{0.0, 0.6}, Interval{0.0, 0.6}, Interval{0.0, 0.6}};
  CompositeMode mode = CompositeMode::Literal;
  int output_size = 512;
  std::uint64_t seed = 0;

  // Ground-truth page jitter.
  Interval gt_scale{1.0, 1.25};
  Interval gt_rotation_deg{-5.0, 5.0};
  // Mask template jitter.
  Interval mask_scale{0.75, 1.5};
  Interval mask_rotation_deg{0.0, 360.0};

  void validate() const;
};

struct Histogram {
  int channel = 0;
  std::vector<std::size_t> counts;
  bool normalized = false;

  int bin_count() const noexcept { return static_cast<int>(counts.size()); }
  std::size_t total() const noexcept;
};

// histogram_equalize -> affine_crop -> clamp. Pixels that are exactly zero in the template
// stay zero (shadow-free); everything else takes its equalized CDF level.
SoftMask prepare_template(const Image& template_gray, const AffineParams& transform);

// Literal:    I_s = a I_sf + (1 - a) m C
// Attenuated: I_s = (1 - (1 - a) m) I_sf + (1 - a) m C
// Output clamped to [0, 1].
Image composite_shadow(const Image& gt, const SoftMask& mask, double weight, const ShadowColor& color,
                       CompositeMode mode);

struct SyntheticSample {
  std::string id;
  Image shadow;
  Image gt;
  SoftMask mask;
  SampleRecord record;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  std::vector<SyntheticSample> samples;  // same order as manifest.records
};

// Samples (a, C, transforms, sources) from the per-sample engine seeded by (cfg.seed, index).
SynthParams draw_sample_params(const SynthConfig& cfg, std::size_t index, std::size_t gt_count,
                               std::size_t template_count, int gt_height, int gt_width,
                               int template_height, int template_width);

// Re-renders one sample from its recorded parameters.
SyntheticSample render_sample(const std::vector<Image>& gt_sources, const std::vector<Image>& template_sources,
                              const SynthParams& params, const std::string& id);

SyntheticDataset generate_dataset(const std::vector<Image>& gt_sources, const std::vector<Image>& template_sources,
                                  const SynthConfig& cfg, std::size_t count);

// Reads sources from disk (IoError names the failing path), generates, and writes
// root/{shadow,gt,mask}/<id>.png plus root/manifest.json.
DatasetManifest generate_dataset_to_disk(const std::vector<std::filesystem::path>& gt_paths,
                                         const std::vector<std::filesystem::path>& template_paths,
                                         const SynthConfig& cfg, std::size_t count,
                                         const std::filesystem::path& root);

// Procedural stand-ins for scanned pages: tinted paper with rows of dark word strokes.
Image make_toy_page(int height, int width, std::uint64_t seed);
// Grayscale shadow template: a soft-edged ellipse or a half-plane with a penumbra ramp.
// Zero marks shadow-free pixels.
Image make_toy_shadow_template(int height, int width, std::uint64_t seed);

// H, S, V histograms with uniform bins over [0, 1].
std::array<Histogram, 3> color_histogram(const Image& rgb, int bins);

}  // namespace shadowlab
