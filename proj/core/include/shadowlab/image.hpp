#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace shadowlab {

// Dense row-major raster with interleaved channels and samples in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  // Validates dimensions, length, and the unit-interval range.
  static Image from_samples(int height, int width, int channels, std::vector<float> samples);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  float& at(int y, int x, int c = 0) noexcept { return samples_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const noexcept { return samples_[index(y, x, c)]; }

  std::span<float> samples() noexcept { return samples_; }
  std::span<const float> samples() const noexcept { return samples_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool same_extent(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  // Clamps every sample into [0, 1]; NaN maps to 0.
  void clamp_unit() noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> samples_;
};

// Radii of the windowed filters used by the soft-mask pipeline. Radius 0 is identity.
struct FilterConfig {
  int dilate_radius = 4;
  int median_radius_pre = 5;
  int median_radius_post = 3;

  void validate() const;
};

// Geometric transform for affine_crop. Rotation is in degrees about the source center,
// clockwise as displayed (y axis down); offsets move the crop center off the source center.
struct AffineParams {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  int out_height = 512;
  int out_width = 512;

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

void require_channels(const Image& img, int channels, const char* op);

Image to_gray(const Image& rgb);
Image extract_channel(const Image& img, int channel);
Image rgb_to_ycrcb(const Image& rgb);
Image rgb_to_hsv(const Image& rgb);

Image dilate(const Image& gray, int radius);
Image median_filter(const Image& gray, int radius);
Image histogram_equalize(const Image& gray);

Image affine_crop(const Image& img, const AffineParams& params);

// Mean over non-overlapping factor x factor blocks, edge blocks replicate-padded.
Image block_mean(const Image& img, int factor);

}  // namespace shadowlab
