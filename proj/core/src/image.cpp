#include "shadowlab/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shadowlab/error.hpp"
#include "shadowlab/parallel.hpp"

namespace shadowlab {

Image::Image(int height, int width, int channels, float fill) {
  if (height < 1 || width < 1) throw InvalidInput("Image: height and width must be >= 1");
  if (channels != 1 && channels != 3) throw InvalidInput("Image: channels must be 1 or 3");
  if (!(fill >= 0.0f && fill <= 1.0f)) throw InvalidInput("Image: fill outside [0, 1]");
  height_ = height;
  width_ = width;
  channels_ = channels;
  samples_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::from_samples(int height, int width, int channels, std::vector<float> samples) {
  Image img(height, width, channels);
  if (samples.size() != img.size()) {
    throw InvalidInput("Image: expected " + std::to_string(img.size()) + " samples, got " +
                       std::to_string(samples.size()));
  }
  for (float v : samples) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInput("Image: sample outside [0, 1]");
  }
  img.samples_ = std::move(samples);
  return img;
}

void Image::clamp_unit() noexcept {
  for (float& v : samples_) {
    v = (v >= 0.0f) ? std::min(v, 1.0f) : 0.0f;
  }
}

void FilterConfig::validate() const {
  if (dilate_radius < 0 || median_radius_pre < 0 || median_radius_post < 0) {
    throw ValidationError("filter radii must be >= 0");
  }
}

void require_channels(const Image& img, int channels, const char* op) {
  if (img.empty()) throw InvalidInput(std::string(op) + ": empty image");
  if (img.channels() != channels) {
    throw InvalidInput(std::string(op) + ": expected " + std::to_string(channels) +
                       " channel(s), got " + std::to_string(img.channels()));
  }
}

namespace {

// BT.601 luma, shared by to_gray and the Y channel of rgb_to_ycrcb.
inline float luma(float r, float g, float b) noexcept {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<float>(std::clamp(y, 0.0, 1.0));
}

inline float unit(double v) noexcept { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

Image to_gray(const Image& rgb) {
  require_channels(rgb, 3, "to_gray");
  Image out(rgb.height(), rgb.width(), 1);
  auto src = rgb.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < out.size(); ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

Image extract_channel(const Image& img, int channel) {
  if (channel < 0 || channel >= img.channels()) throw InvalidInput("extract_channel: bad channel");
  Image out(img.height(), img.width(), 1);
  auto src = img.samples();
  auto dst = out.samples();
  const auto c = static_cast<std::size_t>(img.channels());
  for (std::size_t i = 0; i < out.size(); ++i) dst[i] = src[i * c + static_cast<std::size_t>(channel)];
  return out;
}

Image rgb_to_ycrcb(const Image& rgb) {
  require_channels(rgb, 3, "rgb_to_ycrcb");
  Image out(rgb.height(), rgb.width(), 3);
  auto src = rgb.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const float r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    const float y = luma(r, g, b);
    dst[3 * i] = y;
    dst[3 * i + 1] = unit((r - y) * 0.713 + 0.5);
    dst[3 * i + 2] = unit((b - y) * 0.564 + 0.5);
  }
  return out;
}

Image rgb_to_hsv(const Image& rgb) {
  require_channels(rgb, 3, "rgb_to_hsv");
  Image out(rgb.height(), rgb.width(), 3);
  auto src = rgb.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    const double r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0.0;
    if (delta > 0.0) {
      if (mx == r) {
        h = (g - b) / delta;
        if (h < 0.0) h += 6.0;
      } else if (mx == g) {
        h = (b - r) / delta + 2.0;
      } else {
        h = (r - g) / delta + 4.0;
      }
      h /= 6.0;
    }
    const double s = mx > 0.0 ? delta / mx : 0.0;
    dst[3 * i] = unit(h >= 1.0 ? 0.0 : h);
    dst[3 * i + 1] = unit(s);
    dst[3 * i + 2] = unit(mx);
  }
  return out;
}

}  // namespace shadowlab
