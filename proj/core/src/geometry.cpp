#include <cmath>
#include <numbers>

#include "shadowlab/error.hpp"
#include "shadowlab/image.hpp"
#include "shadowlab/parallel.hpp"

namespace shadowlab {

namespace {

inline int clamp_index(int i, int n) noexcept { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Bilinear sample with replicated borders.
float sample_bilinear(const Image& img, double sx, double sy, int c) noexcept {
  const double fx = std::floor(sx), fy = std::floor(sy);
  const double tx = sx - fx, ty = sy - fy;
  const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
  const int h = img.height(), w = img.width();
  const int xa = clamp_index(x0, w), xb = clamp_index(x0 + 1, w);
  const int ya = clamp_index(y0, h), yb = clamp_index(y0 + 1, h);
  const double top = (1.0 - tx) * img.at(ya, xa, c) + tx * img.at(ya, xb, c);
  const double bottom = (1.0 - tx) * img.at(yb, xa, c) + tx * img.at(yb, xb, c);
  const double v = (1.0 - ty) * top + ty * bottom;
  return static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
}

}  // namespace

Image affine_crop(const Image& img, const AffineParams& p) {
  if (img.empty()) throw InvalidInput("affine_crop: empty image");
  if (!(p.scale > 0.0) || !std::isfinite(p.scale)) throw InvalidInput("affine_crop: scale must be > 0");
  if (p.out_height < 1 || p.out_width < 1) throw InvalidInput("affine_crop: output size must be >= 1");

  // Output pixel p maps back to src_center + offset + R(-theta) (p - out_center) / scale.
  // Multiples of 90 degrees use exact trigonometry so index permutations stay exact.
  double rot = std::fmod(p.rotation_deg, 360.0);
  if (rot < 0.0) rot += 360.0;
  double cs = 0.0, sn = 0.0;
  if (rot == 0.0) {
    cs = 1.0;
  } else if (rot == 90.0) {
    sn = 1.0;
  } else if (rot == 180.0) {
    cs = -1.0;
  } else if (rot == 270.0) {
    sn = -1.0;
  } else {
    const double rad = rot * std::numbers::pi / 180.0;
    cs = std::cos(rad);
    sn = std::sin(rad);
  }
  const double src_cx = (img.width() - 1) * 0.5 + p.offset_x;
  const double src_cy = (img.height() - 1) * 0.5 + p.offset_y;
  const double out_cx = (p.out_width - 1) * 0.5;
  const double out_cy = (p.out_height - 1) * 0.5;
  const double inv = 1.0 / p.scale;

  Image out(p.out_height, p.out_width, img.channels());
  parallel_for(static_cast<std::size_t>(p.out_height), [&](std::size_t b, std::size_t e) {
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
      for (int x = 0; x < p.out_width; ++x) {
        const double dx = (x - out_cx) * inv, dy = (y - out_cy) * inv;
        const double sx = src_cx + cs * dx + sn * dy;
        const double sy = src_cy - sn * dx + cs * dy;
        for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_bilinear(img, sx, sy, c);
      }
    }
  });
  return out;
}

}  // namespace shadowlab
