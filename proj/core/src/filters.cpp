#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "shadowlab/error.hpp"
#include "shadowlab/image.hpp"
#include "shadowlab/parallel.hpp"

namespace shadowlab {

namespace {

inline int clamp_index(int i, int n) noexcept { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

void require_radius(int radius, const char* op) {
  if (radius < 0) throw InvalidInput(std::string(op) + ": radius must be >= 0");
}

}  // namespace

Image dilate(const Image& gray, int radius) {
  require_channels(gray, 1, "dilate");
  require_radius(radius, "dilate");
  if (radius == 0) return gray;
  const int h = gray.height(), w = gray.width();

  // The square max window is separable: rows first, then columns.
  Image rows(h, w, 1);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
      for (int x = 0; x < w; ++x) {
        float m = 0.0f;
        for (int dx = -radius; dx <= radius; ++dx) m = std::max(m, gray.at(y, clamp_index(x + dx, w)));
        rows.at(y, x) = m;
      }
    }
  });
  Image out(h, w, 1);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
      for (int x = 0; x < w; ++x) {
        float m = 0.0f;
        for (int dy = -radius; dy <= radius; ++dy) m = std::max(m, rows.at(clamp_index(y + dy, h), x));
        out.at(y, x) = m;
      }
    }
  });
  return out;
}

Image median_filter(const Image& gray, int radius) {
  require_channels(gray, 1, "median_filter");
  require_radius(radius, "median_filter");
  if (radius == 0) return gray;
  const int h = gray.height(), w = gray.width();
  const int side = 2 * radius + 1;
  const std::size_t population = static_cast<std::size_t>(side) * side;
  const std::size_t mid = population / 2;

  Image out(h, w, 1);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e) {
    std::vector<float> window(population);
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          const int yy = clamp_index(y + dy, h);
          for (int dx = -radius; dx <= radius; ++dx) window[k++] = gray.at(yy, clamp_index(x + dx, w));
        }
        std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(mid), window.end());
        out.at(y, x) = window[mid];
      }
    }
  });
  return out;
}

Image histogram_equalize(const Image& gray) {
  require_channels(gray, 1, "histogram_equalize");
  constexpr int kBins = 256;
  auto bin_of = [](float v) { return std::min(kBins - 1, static_cast<int>(v * kBins)); };

  std::array<std::size_t, kBins> counts{};
  for (float v : gray.samples()) ++counts[static_cast<std::size_t>(bin_of(v))];
  std::array<float, kBins> lut{};
  std::size_t running = 0;
  const double total = static_cast<double>(gray.size());
  for (int i = 0; i < kBins; ++i) {
    running += counts[static_cast<std::size_t>(i)];
    lut[static_cast<std::size_t>(i)] = static_cast<float>(static_cast<double>(running) / total);
  }

  Image out(gray.height(), gray.width(), 1);
  auto src = gray.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = lut[static_cast<std::size_t>(bin_of(src[i]))];
  return out;
}

Image block_mean(const Image& img, int factor) {
  if (factor < 1) throw InvalidInput("block_mean: factor must be >= 1");
  if (factor == 1) return img;
  const int h = img.height(), w = img.width(), c = img.channels();
  const int oh = (h + factor - 1) / factor, ow = (w + factor - 1) / factor;
  Image out(oh, ow, c);
  const double norm = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int k = 0; k < c; ++k) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            s += img.at(clamp_index(y * factor + dy, h), clamp_index(x * factor + dx, w), k);
        out.at(y, x, k) = static_cast<float>(std::clamp(s * norm, 0.0, 1.0));
      }
  return out;
}

}  // namespace shadowlab
