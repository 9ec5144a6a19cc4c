#pragma once

#include "shadowlab/image.hpp"

namespace shadowlab {

// Per-pixel shadow strength in [0, 1]: 0 is shadow-free, 1 the darkest shadow core.
class SoftMask {
 public:
  SoftMask() = default;
  // Takes a single-channel image; values are already guaranteed to be in [0, 1].
  explicit SoftMask(Image field);
  static SoftMask zeros(int height, int width);

  int height() const noexcept { return field_.height(); }
  int width() const noexcept { return field_.width(); }
  float at(int y, int x) const noexcept { return field_.at(y, x); }
  float& at(int y, int x) noexcept { return field_.at(y, x); }
  const Image& image() const noexcept { return field_; }
  bool empty() const noexcept { return field_.empty(); }

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  Image field_;
};

struct SsgmConfig {
  double dark_fraction = 0.1;
  FilterConfig filters{};
  bool invert_to_convention = true;
  // Below this background contrast (p_max - p_mean) no shadow is reported.
  double degenerate_eps = 0.02;

  void validate() const;
};

// Number of darkest pixels averaged for p_mean: round(a * w * h), at least 1.
std::size_t dark_pixel_count(std::size_t pixel_count, double dark_fraction);

// Mean of the round(a * w * h) smallest samples.
double dark_pixel_mean(const Image& background, double dark_fraction);

// Unclamped (bg - p_mean) / (p_max - p_mean), stored in doubles. Returns an empty
// vector when the background contrast is below degenerate_eps.
std::vector<double> raw_mask_field(const Image& background, double p_mean, const SsgmConfig& cfg);

SoftMask normalize_mask(const Image& background, double p_mean, const SsgmConfig& cfg);

// Grayscale background estimate: to_gray -> dilate -> median_filter(pre).
Image estimate_background(const Image& shadow_rgb, const FilterConfig& filters);

SoftMask generate_soft_mask(const Image& shadow_rgb, const SsgmConfig& cfg);

}  // namespace shadowlab
