#include "shadowlab/loss.hpp"

#include <cmath>
#include <string>

#include "shadowlab/error.hpp"
#include "shadowlab/random.hpp"

namespace shadowlab {

double diff_loss(const Tensor& eps_pred, const Tensor& eps_true) {
  require_same_shape(eps_pred, eps_true, "diff_loss");
  if (eps_pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < eps_pred.size(); ++i) s += std::abs(eps_pred[i] - eps_true[i]);
  return s / static_cast<double>(eps_pred.size());
}

void FeatureWeights::validate() const {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("feature weights must be nonnegative");
    sum += v;
  }
  if (!(sum > 0.0)) throw ValidationError("feature weights must not all be zero");
}

std::array<double, kPyramidSlices> FeatureWeights::normalized() const {
  validate();
  double sum = 0.0;
  for (double v : w) sum += v;
  std::array<double, kPyramidSlices> out{};
  for (int i = 0; i < kPyramidSlices; ++i) out[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(i)] / sum;
  return out;
}

FeatureExtractor::FeatureExtractor(std::uint64_t seed, int in_channels, std::array<int, kPyramidSlices> widths)
    : seed_(seed), in_channels_(in_channels) {
  Engine rng = make_engine(seed);
  int cin = in_channels;
  for (std::size_t i = 0; i < kPyramidSlices; ++i) {
    weights_[i] = nn::Parameter("pyramid.w" + std::to_string(i), Tensor({widths[i], cin, 3, 3}));
    biases_[i] = nn::Parameter("pyramid.b" + std::to_string(i), Tensor({widths[i]}));
    nn::init_kaiming(weights_[i], rng, cin * 9);
    nn::init_zero(biases_[i]);
    cin = widths[i];
  }
}

std::array<nn::Var, kPyramidSlices> FeatureExtractor::forward(nn::Graph& g, nn::Var img) const {
  const Tensor& v = g.value(img);
  if (v.rank() != 3 || v.dim(0) != in_channels_) {
    throw InvalidInput("extract_pyramid: expected " + std::to_string(in_channels_) + " input channels");
  }
  if (v.dim(1) < kMinSize || v.dim(2) < kMinSize) {
    throw InvalidInput("extract_pyramid: image must be at least 32x32");
  }
  // Centre intensities so the random filters see signed input.
  nn::Var h = g.add_const(img, Tensor(v.shape(), -0.5));
  std::array<nn::Var, kPyramidSlices> out;
  for (std::size_t i = 0; i < kPyramidSlices; ++i) {
    if (i > 0) h = g.maxpool2x2(h);
    h = g.relu(g.conv2d(h, g.bind(weights_[i], false), g.bind(biases_[i], false), 1, 1));
    out[i] = h;
  }
  return out;
}

FeaturePyramid FeatureExtractor::extract(const Tensor& img) const {
  nn::Graph g;
  const auto vars = forward(g, g.constant(img));
  FeaturePyramid p;
  p.extractor_seed = seed_;
  for (std::size_t i = 0; i < kPyramidSlices; ++i) p.slices[i] = g.value(vars[i]);
  return p;
}

FeaturePyramid extract_pyramid(const Image& img, const FeatureExtractor& extractor) {
  return extractor.extract(image_to_tensor(img));
}

double fea_loss(const FeaturePyramid& a, const FeaturePyramid& b, const FeatureWeights& weights) {
  const auto w = weights.normalized();
  double total = 0.0;
  for (std::size_t i = 0; i < kPyramidSlices; ++i) {
    require_same_shape(a.slices[i], b.slices[i], "fea_loss");
    double s = 0.0;
    for (std::size_t k = 0; k < a.slices[i].size(); ++k) {
      const double d = a.slices[i][k] - b.slices[i][k];
      s += d * d;
    }
    total += w[i] * s / static_cast<double>(a.slices[i].size());
  }
  return total;
}

double fea_loss(const Image& a, const Image& b, const FeatureWeights& weights, const FeatureExtractor& extractor) {
  if (!a.same_shape(b)) throw InvalidInput("fea_loss: image shapes differ");
  return fea_loss(extract_pyramid(a, extractor), extract_pyramid(b, extractor), weights);
}

nn::Var fea_loss(nn::Graph& g, nn::Var img, const FeaturePyramid& target, const FeatureWeights& weights,
                 const FeatureExtractor& extractor) {
  const auto w = weights.normalized();
  const auto slices = extractor.forward(g, img);
  std::vector<nn::Var> terms;
  for (std::size_t i = 0; i < kPyramidSlices; ++i) {
    terms.push_back(g.mean_sq_diff(slices[i], g.constant(target.slices[i])));
  }
  return g.weighted_sum(terms, std::vector<double>(w.begin(), w.end()));
}

double total_loss(double l_diff, double l_fea, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("total_loss: lambda must lie in [0, 1]");
  return lambda * l_diff + (1.0 - lambda) * l_fea;
}

}  // namespace shadowlab
