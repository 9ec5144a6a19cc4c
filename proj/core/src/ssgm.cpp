#include "shadowlab/ssgm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "shadowlab/error.hpp"

namespace shadowlab {

SoftMask::SoftMask(Image field) : field_(std::move(field)) {
  require_channels(field_, 1, "SoftMask");
}

SoftMask SoftMask::zeros(int height, int width) { return SoftMask(Image(height, width, 1, 0.0f)); }

void SsgmConfig::validate() const {
  if (!(dark_fraction > 0.0 && dark_fraction < 1.0)) {
    throw ValidationError("ssgm.dark_fraction must lie in (0, 1)");
  }
  if (!(degenerate_eps > 0.0)) throw ValidationError("ssgm.degenerate_eps must be > 0");
  filters.validate();
}

std::size_t dark_pixel_count(std::size_t pixel_count, double dark_fraction) {
  const double m = std::round(dark_fraction * static_cast<double>(pixel_count));
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(m, 1.0)), 1, pixel_count);
}

double dark_pixel_mean(const Image& background, double dark_fraction) {
  require_channels(background, 1, "dark_pixel_mean");
  if (!(dark_fraction > 0.0 && dark_fraction < 1.0)) {
    throw InvalidInput("dark_pixel_mean: fraction must lie in (0, 1)");
  }
  std::vector<float> values(background.samples().begin(), background.samples().end());
  const std::size_t m = dark_pixel_count(values.size(), dark_fraction);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m - 1), values.end());
  std::sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m));
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += values[i];
  return sum / static_cast<double>(m);
}

std::vector<double> raw_mask_field(const Image& background, double p_mean, const SsgmConfig& cfg) {
  require_channels(background, 1, "raw_mask_field");
  const auto samples = background.samples();
  const double p_max = *std::max_element(samples.begin(), samples.end());
  const double range = p_max - p_mean;
  if (!(range >= cfg.degenerate_eps)) return {};
  std::vector<double> raw(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) raw[i] = (samples[i] - p_mean) / range;
  return raw;
}

SoftMask normalize_mask(const Image& background, double p_mean, const SsgmConfig& cfg) {
  const auto raw = raw_mask_field(background, p_mean, cfg);
  Image out(background.height(), background.width(), 1, 0.0f);
  if (raw.empty()) return SoftMask(std::move(out));
  auto dst = out.samples();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(raw[i], 0.0, 1.0);
    dst[i] = static_cast<float>(cfg.invert_to_convention ? 1.0 - v : v);
  }
  return SoftMask(std::move(out));
}

Image estimate_background(const Image& shadow_rgb, const FilterConfig& filters) {
  const Image gray = to_gray(shadow_rgb);
  const Image dilated = dilate(gray, filters.dilate_radius);
  return median_filter(dilated, filters.median_radius_pre);
}

SoftMask generate_soft_mask(const Image& shadow_rgb, const SsgmConfig& cfg) {
  cfg.validate();
  require_channels(shadow_rgb, 3, "generate_soft_mask");
  const Image background = estimate_background(shadow_rgb, cfg.filters);
  const double p_mean = dark_pixel_mean(background, cfg.dark_fraction);
  const SoftMask mask = normalize_mask(background, p_mean, cfg);
  return SoftMask(median_filter(mask.image(), cfg.filters.median_radius_post));
}

}  // namespace shadowlab
