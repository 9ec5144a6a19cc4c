#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "shadowlab/image.hpp"
#include "shadowlab/tensor.hpp"

namespace fixtures {

inline shadowlab::Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  shadowlab::Image img(h, w, c);
  for (float& v : img.samples()) v = u(rng);
  return img;
}

inline shadowlab::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  shadowlab::Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("shadowlab-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
