#pragma once

#include <array>
#include <cstdint>

#include "shadowlab/image.hpp"
#include "shadowlab/nn.hpp"
#include "shadowlab/tensor.hpp"

namespace shadowlab {

inline constexpr int kPyramidSlices = 5;

// Mean absolute difference over all elements.
double diff_loss(const Tensor& eps_pred, const Tensor& eps_true);

struct FeatureWeights {
  std::array<double, kPyramidSlices> w{0.1, 0.1, 0.2, 0.3, 0.3};

  void validate() const;
  // Weights scaled to sum to one.
  std::array<double, kPyramidSlices> normalized() const;
};

struct FeaturePyramid {
  std::array<Tensor, kPyramidSlices> slices;
  std::uint64_t extractor_seed = 0;
};

// Frozen random convolution pyramid standing in for a pretrained backbone. Slice i runs
// at stride 2^i: slice 0 is conv+ReLU at full resolution, every later slice is
// maxpool(2x2, ceil) followed by conv+ReLU.
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed'fea7ULL;
  static constexpr int kMinSize = 32;

  explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed, int in_channels = 3,
                            std::array<int, kPyramidSlices> widths = {8, 16, 16, 32, 32});

  FeaturePyramid extract(const Tensor& img) const;
  std::array<nn::Var, kPyramidSlices> forward(nn::Graph& g, nn::Var img) const;

  std::uint64_t seed() const noexcept { return seed_; }
  int in_channels() const noexcept { return in_channels_; }

 private:
  std::uint64_t seed_;
  int in_channels_;
  std::array<nn::Parameter, kPyramidSlices> weights_;
  std::array<nn::Parameter, kPyramidSlices> biases_;
};

FeaturePyramid extract_pyramid(const Image& img, const FeatureExtractor& extractor);

// sum_i w_i * mean((s_i(a) - s_i(b))^2) with normalized weights.
double fea_loss(const FeaturePyramid& a, const FeaturePyramid& b, const FeatureWeights& weights);
double fea_loss(const Image& a, const Image& b, const FeatureWeights& weights, const FeatureExtractor& extractor);

// Differentiable in the first argument; the target pyramid is treated as constant.
nn::Var fea_loss(nn::Graph& g, nn::Var img, const FeaturePyramid& target, const FeatureWeights& weights,
                 const FeatureExtractor& extractor);

// lambda * l_diff + (1 - lambda) * l_fea, lambda in [0, 1].
double total_loss(double l_diff, double l_fea, double lambda);

}  // namespace shadowlab
