#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace shadowlab {

// Dense double-precision array, row-major over `shape`. Image-like tensors use
// {channels, height, width}; vectors use {n}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> data);

  const std::vector<int>& shape() const noexcept { return shape_; }
  int dim(std::size_t i) const noexcept { return shape_[i]; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // CHW accessors; valid only for rank-3 tensors.
  double& at(int c, int y, int x) noexcept { return data_[chw_index(c, y, x)]; }
  double at(int c, int y, int x) const noexcept { return data_[chw_index(c, y, x)]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;
  double l2_norm() const noexcept;
  void fill(double v) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t chw_index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape_[1]) +
            static_cast<std::size_t>(y)) * static_cast<std::size_t>(shape_[2]) +
           static_cast<std::size_t>(x);
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<int>& shape);
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

class Image;

// Image (HWC floats) <-> tensor (CHW doubles).
Tensor image_to_tensor(const Image& img);
// Samples are clamped into [0, 1].
Image tensor_to_image(const Tensor& t);

}  // namespace shadowlab
