#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "shadowlab/image.hpp"
#include "shadowlab/loss.hpp"
#include "shadowlab/nn.hpp"
#include "shadowlab/sde.hpp"
#include "shadowlab/ssgm.hpp"
#include "shadowlab/tensor.hpp"

namespace shadowlab {

struct ModelConfig {
  int image_channels = 3;
  int codec_hidden = 16;
  int latent_channels = 32;
  int width = 32;  // denoiser feature width
  int blocks = 4;
  int time_dim = 64;
  // Zero-initialises the last convolution of every residual block and the output head.
  bool residual_zero_init = true;
  std::uint64_t seed = 0;

  void validate() const;
  // ~770 parameters; every layer randomly initialised so all gradients are live.
  static ModelConfig check_mode();
};

// Latent plus the pre-padding image size needed to crop on decode.
struct Encoded {
  Tensor latent;
  int height = 0;
  int width = 0;
};

// Two stride-2 conv stages down, nearest-upsample + conv stages up.
class Codec {
 public:
  static constexpr int kFactor = 4;

  Codec() = default;
  explicit Codec(const ModelConfig& cfg);

  // Pads by replication to a multiple of 4.
  Encoded encode(const Image& img) const;
  // Cropped to the recorded size and clamped to [0, 1].
  Image decode(const Encoded& enc) const;
  Image decode(const Tensor& latent, int height, int width) const;

  nn::Var encode(nn::Graph& g, nn::Var x, bool trainable) const;
  // Unclamped, uncropped decoder output.
  nn::Var decode(nn::Graph& g, nn::Var z, bool trainable) const;

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  int latent_channels() const noexcept { return latent_channels_; }

 private:
  int image_channels_ = 3;
  int latent_channels_ = 32;
  nn::Parameter enc0_w_, enc0_b_, enc1_w_, enc1_b_;
  nn::Parameter dec0_w_, dec0_b_, dec1_w_, dec1_b_, dec2_w_, dec2_b_;
};

// Replication-pads an image tensor [C, H, W] to multiples of `factor`.
Tensor pad_to_multiple(const Tensor& img, int factor);

// Interleaved [sin(t f_0), cos(t f_0), sin(t f_1), ...] with f_i = 10000^(-i / (dim/2)).
Tensor sinusoidal_embedding(int t, int dim);

// Sinusoid -> Linear -> SiLU -> Linear.
class TimeEmbedding {
 public:
  TimeEmbedding() = default;
  TimeEmbedding(int dim, Engine& rng);

  Tensor operator()(int t) const;
  nn::Var forward(nn::Graph& g, int t, bool trainable) const;
  int dim() const noexcept { return dim_; }

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;

 private:
  int dim_ = 0;
  nn::Parameter w0_, b0_, w1_, b1_;
};

// Input [state_gain * (x_t - cond), cond, modulation] -> conv -> K residual blocks with time
// FiLM -> conv. Training and sampling pass state_gain = 1 / unit_std(t), so the state channel
// has unit scale at every step.
class Denoiser {
 public:
  Denoiser() = default;
  explicit Denoiser(const ModelConfig& cfg);

  // x_t, cond: [C, h, w]; modulation: [1, h, w] or [C, h, w].
  Tensor predict_noise(const Tensor& x_t, const Tensor& cond, const Tensor& modulation, int t,
                       double state_gain = 1.0) const;
  nn::Var forward(nn::Graph& g, nn::Var x_t, nn::Var cond, const Tensor& modulation, int t, bool trainable,
                  double state_gain = 1.0) const;

  const TimeEmbedding& time_embedding() const noexcept { return temb_; }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  int latent_channels() const noexcept { return latent_channels_; }

 private:
  struct Block {
    nn::Parameter conv_a_w, conv_a_b, film_w, film_b, conv_b_w, conv_b_b;
  };

  int latent_channels_ = 0;
  int width_ = 0;
  TimeEmbedding temb_;
  nn::Parameter in_w_, in_b_, out_w_, out_b_;
  std::vector<Block> blocks_;
};

struct ShadowModel {
  ModelConfig config;
  Codec codec;
  Denoiser denoiser;

  ShadowModel() = default;
  explicit ShadowModel(const ModelConfig& cfg) : config(cfg), codec(cfg), denoiser(cfg) {}

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

// Modulation at latent resolution: 4x4 window mean of the mask, then polarity.
Tensor latent_modulation(const SoftMask& mask, Polarity polarity);

struct TrainConfig {
  int patch_size = 128;
  int batch_size = 4;
  double learning_rate = 3e-5;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double lambda = 0.5;
  int codec_iterations = 500;
  double codec_learning_rate = 1e-3;
  Polarity polarity = Polarity::Prose;
  // Default: x_0 = shadow-free latent, mu = shadow latent. Swapped trains toward the
  // shadow-free endpoint instead.
  bool swap_endpoints = false;
  FeatureWeights feature_weights;
  std::uint64_t extractor_seed = FeatureExtractor::kDefaultSeed;

  void validate() const;
};

struct TrainingSample {
  Image shadow;
  Image gt;
  SoftMask mask;
};

struct LossReport {
  double l_diff = 0.0;
  double l_fea = 0.0;  // already scaled by the per-step weight e^(-2 Theta_t)
  double l_total = 0.0;
};

// Cached per-run state shared by train steps.
class Trainer {
 public:
  Trainer(ShadowModel& model, SdeSchedule sched, TrainConfig cfg);

  // Autoencoder pretraining with an L1 reconstruction loss; returns per-step losses.
  std::vector<double> pretrain_codec(const std::vector<Image>& images);
  // One Adam update of the denoiser on the batch; the codec stays frozen.
  LossReport train_step(const std::vector<const TrainingSample*>& batch);
  // Runs cfg.iterations steps drawing batches from `data`. The callback sees each report.
  std::vector<LossReport> train(const std::vector<TrainingSample>& data,
                                const std::function<void(int, const LossReport&)>& on_step = {});

  long step() const noexcept { return step_; }
  const FeatureExtractor& extractor() const noexcept { return extractor_; }

 private:
  LossReport sample_loss(const TrainingSample& s, std::size_t slot, nn::Graph& g, std::vector<Tensor>& grads) const;

  ShadowModel& model_;
  SdeSchedule sched_;
  TrainConfig cfg_;
  FeatureExtractor extractor_;
  nn::Adam denoiser_opt_;
  nn::Adam codec_opt_;
  long step_ = 0;
  long codec_step_ = 0;
};

// Deterministic crop of all three images to the configured patch (whole image when
// smaller). Offsets come from the engine.
TrainingSample crop_sample(const TrainingSample& s, int patch, Engine& rng);

// Max relative error |a - n| / max(|a| + |n|, 1e-8) between analytic and central
// difference gradients of L_diff over every denoiser parameter.
struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};
GradientCheckResult gradient_check(Denoiser& denoiser, const Tensor& x_t, const Tensor& cond,
                                   const Tensor& modulation, const Tensor& eps_true, int t, double step = 1e-4);

struct RemoveConfig {
  Polarity polarity = Polarity::Prose;
  ReverseMode reverse_mode = ReverseMode::Stochastic;
  SsgmConfig ssgm;
  std::uint64_t seed = 0;
  // Stochastic mode only: decoded outputs of this many independent runs are averaged.
  int samples = 1;
};

// Generates the soft-mask with SSGM and delegates.
Image remove_shadow(const Image& shadow, const ShadowModel& model, const SdeSchedule& sched, const RemoveConfig& cfg);
Image remove_shadow(const Image& shadow, const SoftMask& mask, const ShadowModel& model, const SdeSchedule& sched,
                    const RemoveConfig& cfg);

// Versioned checkpoint: text header naming every tensor and its shape, then the values
// as little-endian IEEE-754 doubles in header order.
struct Checkpoint {
  static constexpr const char* kMagic = "shadowlab-checkpoint";
  static constexpr int kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const ShadowModel& model, const SdeSchedule& sched);
// Rebuilds the model from the stored config and copies every tensor; names and shapes
// must match exactly.
ShadowModel model_from_checkpoint(const Checkpoint& ckpt, SdeSchedule* sched = nullptr);

}  // namespace shadowlab
