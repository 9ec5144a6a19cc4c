#include "shadowlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "shadowlab/error.hpp"
#include "shadowlab/parallel.hpp"

namespace shadowlab {

using nn::Graph;
using nn::Parameter;
using nn::Var;

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kBatchStream = 0xba7c;
constexpr std::uint64_t kCodecBatchStream = 0xc0dec;
constexpr std::uint64_t kSampleStream = 0x5a3e;
constexpr std::uint64_t kNoiseStream = 0x0015e;
constexpr std::uint64_t kRemoveStream = 0x2e30;

Parameter conv_param(const std::string& name, int cout, int cin) { return Parameter(name, Tensor({cout, cin, 3, 3})); }
Parameter bias_param(const std::string& name, int n) { return Parameter(name, Tensor({n})); }

void init_bias(Parameter& p, Engine& rng, bool random) {
  if (random)
    nn::init_uniform(p, rng, 0.1);
  else
    nn::init_zero(p);
}

template <typename Vec>
void append(Vec& dst, const Vec& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 == 0 && x0 == 0 && h == img.height() && w == img.width()) return img;
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

Tensor crop_tensor(const Tensor& t, int h, int w) {
  if (t.dim(1) == h && t.dim(2) == w) return t;
  Tensor out({t.dim(0), h, w});
  for (int c = 0; c < t.dim(0); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y, x);
  return out;
}

Tensor modulation_plane(const Tensor& modulation, int h, int w) {
  if (modulation.rank() == 3 && modulation.dim(1) == h && modulation.dim(2) == w) {
    if (modulation.dim(0) == 1) return modulation;
    Tensor out({1, h, w});
    std::copy_n(modulation.storage().begin(), static_cast<std::ptrdiff_t>(out.size()), out.storage().begin());
    return out;
  }
  if (modulation.rank() == 2 && modulation.dim(0) == h && modulation.dim(1) == w) {
    return Tensor({1, h, w}, modulation.storage());
  }
  throw InvalidInput("denoiser: modulation " + shape_string(modulation.shape()) + " does not match latent");
}

// Sums per-sample gradients in slot order, so the reduction is thread-count independent.
void reduce_gradients(const std::vector<Parameter*>& params, const std::vector<std::vector<Tensor>>& per_sample) {
  nn::zero_grads(params);
  const double inv = 1.0 / static_cast<double>(per_sample.size());
  for (const auto& grads : per_sample) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& dst = params[k]->grad;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grads[k][i];
    }
  }
  for (Parameter* p : params)
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv;
}

}  // namespace

void ModelConfig::validate() const {
  if (image_channels != 1 && image_channels != 3) throw ValidationError("model.image_channels must be 1 or 3");
  if (codec_hidden < 1) throw ValidationError("model.codec_hidden must be >= 1");
  if (latent_channels < 1) throw ValidationError("model.latent_channels must be >= 1");
  if (width < 1) throw ValidationError("model.width must be >= 1");
  if (blocks < 1) throw ValidationError("model.blocks must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) throw ValidationError("model.time_dim must be even and >= 2");
}

ModelConfig ModelConfig::check_mode() {
  ModelConfig c;
  c.codec_hidden = 4;
  c.latent_channels = 2;
  c.width = 4;
  c.blocks = 1;
  c.time_dim = 8;
  c.residual_zero_init = false;
  return c;
}

Tensor pad_to_multiple(const Tensor& img, int factor) {
  if (img.rank() != 3) throw InvalidInput("pad_to_multiple: expected [C, H, W]");
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const int ph = (h + factor - 1) / factor * factor, pw = (w + factor - 1) / factor * factor;
  if (ph == h && pw == w) return img;
  Tensor out({c, ph, pw});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x) out.at(k, y, x) = img.at(k, std::min(y, h - 1), std::min(x, w - 1));
  return out;
}

// ---------------------------------------------------------------- codec

Codec::Codec(const ModelConfig& cfg) : image_channels_(cfg.image_channels), latent_channels_(cfg.latent_channels) {
  cfg.validate();
  Engine rng = make_engine(cfg.seed, kInitStream);
  const int c = cfg.image_channels, h = cfg.codec_hidden, l = cfg.latent_channels;
  const bool rb = !cfg.residual_zero_init;
  enc0_w_ = conv_param("codec.enc0.w", h, c);
  enc0_b_ = bias_param("codec.enc0.b", h);
  enc1_w_ = conv_param("codec.enc1.w", l, h);
  enc1_b_ = bias_param("codec.enc1.b", l);
  dec0_w_ = conv_param("codec.dec0.w", h, l);
  dec0_b_ = bias_param("codec.dec0.b", h);
  dec1_w_ = conv_param("codec.dec1.w", h, h);
  dec1_b_ = bias_param("codec.dec1.b", h);
  dec2_w_ = conv_param("codec.dec2.w", c, h);
  dec2_b_ = bias_param("codec.dec2.b", c);
  nn::init_kaiming(enc0_w_, rng, c * 9);
  nn::init_kaiming(enc1_w_, rng, h * 9);
  nn::init_kaiming(dec0_w_, rng, l * 9);
  nn::init_kaiming(dec1_w_, rng, h * 9);
  nn::init_kaiming(dec2_w_, rng, h * 9);
  for (Parameter* b : {&enc0_b_, &enc1_b_, &dec0_b_, &dec1_b_, &dec2_b_}) init_bias(*b, rng, rb);
}

Var Codec::encode(Graph& g, Var x, bool trainable) const {
  const Tensor& v = g.value(x);
  if (v.rank() != 3 || v.dim(0) != image_channels_) throw InvalidInput("codec: expected a " + std::to_string(image_channels_) + "-channel image");
  if (v.dim(1) % kFactor != 0 || v.dim(2) % kFactor != 0) throw InvalidInput("codec: input must be padded to a multiple of 4");
  Var h = g.add_const(x, Tensor(v.shape(), -0.5));
  h = g.silu(g.conv2d(h, g.bind(enc0_w_, trainable), g.bind(enc0_b_, trainable), 2, 1));
  return g.conv2d(h, g.bind(enc1_w_, trainable), g.bind(enc1_b_, trainable), 2, 1);
}

Var Codec::decode(Graph& g, Var z, bool trainable) const {
  const Tensor& v = g.value(z);
  if (v.rank() != 3 || v.dim(0) != latent_channels_) throw InvalidInput("codec: latent channel mismatch");
  Var h = g.upsample2x(z);
  h = g.silu(g.conv2d(h, g.bind(dec0_w_, trainable), g.bind(dec0_b_, trainable), 1, 1));
  h = g.upsample2x(h);
  h = g.silu(g.conv2d(h, g.bind(dec1_w_, trainable), g.bind(dec1_b_, trainable), 1, 1));
  h = g.conv2d(h, g.bind(dec2_w_, trainable), g.bind(dec2_b_, trainable), 1, 1);
  return g.add_const(h, Tensor(g.value(h).shape(), 0.5));
}

Encoded Codec::encode(const Image& img) const {
  Graph g;
  const Var z = encode(g, g.constant(pad_to_multiple(image_to_tensor(img), kFactor)), false);
  return Encoded{g.value(z), img.height(), img.width()};
}

Image Codec::decode(const Tensor& latent, int height, int width) const {
  if (latent.rank() != 3 || height < 1 || width < 1 || (height + kFactor - 1) / kFactor != latent.dim(1) ||
      (width + kFactor - 1) / kFactor != latent.dim(2)) {
    throw InvalidInput("codec: latent " + shape_string(latent.shape()) + " does not decode to " +
                       std::to_string(height) + "x" + std::to_string(width));
  }
  Graph g;
  const Var y = decode(g, g.constant(latent), false);
  return tensor_to_image(crop_tensor(g.value(y), height, width));
}

Image Codec::decode(const Encoded& enc) const { return decode(enc.latent, enc.height, enc.width); }

std::vector<Parameter*> Codec::parameters() {
  return {&enc0_w_, &enc0_b_, &enc1_w_, &enc1_b_, &dec0_w_, &dec0_b_, &dec1_w_, &dec1_b_, &dec2_w_, &dec2_b_};
}

std::vector<const Parameter*> Codec::parameters() const {
  return {&enc0_w_, &enc0_b_, &enc1_w_, &enc1_b_, &dec0_w_, &dec0_b_, &dec1_w_, &dec1_b_, &dec2_w_, &dec2_b_};
}

// ---------------------------------------------------------------- time embedding

Tensor sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw InvalidInput("sinusoidal_embedding: dim must be even and >= 2");
  const int half = dim / 2;
  Tensor out({dim});
  for (int i = 0; i < half; ++i) {
    const double f = std::pow(10000.0, -static_cast<double>(i) / half);
    out[static_cast<std::size_t>(2 * i)] = std::sin(t * f);
    out[static_cast<std::size_t>(2 * i + 1)] = std::cos(t * f);
  }
  return out;
}

TimeEmbedding::TimeEmbedding(int dim, Engine& rng) : dim_(dim) {
  w0_ = Parameter("temb.w0", Tensor({dim, dim}));
  b0_ = Parameter("temb.b0", Tensor({dim}));
  w1_ = Parameter("temb.w1", Tensor({dim, dim}));
  b1_ = Parameter("temb.b1", Tensor({dim}));
  nn::init_kaiming(w0_, rng, dim);
  nn::init_kaiming(w1_, rng, dim);
  nn::init_uniform(b0_, rng, 0.1);
  nn::init_uniform(b1_, rng, 0.1);
}

Var TimeEmbedding::forward(Graph& g, int t, bool trainable) const {
  Var s = g.constant(sinusoidal_embedding(t, dim_));
  Var h = g.silu(g.linear(s, g.bind(w0_, trainable), g.bind(b0_, trainable)));
  return g.linear(h, g.bind(w1_, trainable), g.bind(b1_, trainable));
}

Tensor TimeEmbedding::operator()(int t) const {
  Graph g;
  return g.value(forward(g, t, false));
}

std::vector<Parameter*> TimeEmbedding::parameters() { return {&w0_, &b0_, &w1_, &b1_}; }
std::vector<const Parameter*> TimeEmbedding::parameters() const { return {&w0_, &b0_, &w1_, &b1_}; }

// ---------------------------------------------------------------- denoiser

Denoiser::Denoiser(const ModelConfig& cfg) : latent_channels_(cfg.latent_channels), width_(cfg.width) {
  cfg.validate();
  Engine rng = make_engine(cfg.seed, kInitStream + 1);
  const int c = cfg.latent_channels, w = cfg.width, d = cfg.time_dim;
  const bool rb = !cfg.residual_zero_init;
  temb_ = TimeEmbedding(d, rng);
  in_w_ = conv_param("denoiser.in.w", w, 2 * c + 1);
  in_b_ = bias_param("denoiser.in.b", w);
  nn::init_kaiming(in_w_, rng, (2 * c + 1) * 9);
  init_bias(in_b_, rng, rb);
  blocks_.resize(static_cast<std::size_t>(cfg.blocks));
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string p = "denoiser.block" + std::to_string(k) + ".";
    Block& b = blocks_[k];
    b.conv_a_w = conv_param(p + "conv_a.w", w, w);
    b.conv_a_b = bias_param(p + "conv_a.b", w);
    b.film_w = Parameter(p + "film.w", Tensor({2 * w, d}));
    b.film_b = bias_param(p + "film.b", 2 * w);
    b.conv_b_w = conv_param(p + "conv_b.w", w, w);
    b.conv_b_b = bias_param(p + "conv_b.b", w);
    nn::init_kaiming(b.conv_a_w, rng, w * 9);
    init_bias(b.conv_a_b, rng, rb);
    nn::init_uniform(b.film_w, rng, 1.0 / std::sqrt(static_cast<double>(d)));
    init_bias(b.film_b, rng, rb);
    if (cfg.residual_zero_init) {
      nn::init_zero(b.conv_b_w);
    } else {
      nn::init_kaiming(b.conv_b_w, rng, w * 9);
    }
    init_bias(b.conv_b_b, rng, rb);
  }
  out_w_ = conv_param("denoiser.out.w", c, w);
  out_b_ = bias_param("denoiser.out.b", c);
  if (cfg.residual_zero_init) {
    nn::init_zero(out_w_);
  } else {
    nn::init_kaiming(out_w_, rng, w * 9);
  }
  init_bias(out_b_, rng, rb);
}

Var Denoiser::forward(Graph& g, Var x_t, Var cond, const Tensor& modulation, int t, bool trainable,
                      double state_gain) const {
  // Copied: node storage may move as the graph grows.
  const std::vector<int> shape = g.value(x_t).shape();
  if (shape.size() != 3 || shape[0] != latent_channels_) throw InvalidInput("predict_noise: latent channel mismatch");
  require_same_shape(g.value(x_t), g.value(cond), "predict_noise");
  const int h = shape[1], w = shape[2];
  const Tensor plane = modulation_plane(modulation, h, w);

  const Var emb = g.silu(temb_.forward(g, t, trainable));
  const Var state = g.scale(g.sub(x_t, cond), state_gain);
  Var hid = g.conv2d(g.concat_channels({state, cond, g.constant(plane)}), g.bind(in_w_, trainable),
                     g.bind(in_b_, trainable), 1, 1);
  for (const Block& b : blocks_) {
    Var r = g.conv2d(g.silu(hid), g.bind(b.conv_a_w, trainable), g.bind(b.conv_a_b, trainable), 1, 1);
    const Var fb = g.linear(emb, g.bind(b.film_w, trainable), g.bind(b.film_b, trainable));
    r = g.film(r, g.slice(fb, 0, width_), g.slice(fb, width_, 2 * width_));
    r = g.conv2d(g.silu(r), g.bind(b.conv_b_w, trainable), g.bind(b.conv_b_b, trainable), 1, 1);
    hid = g.add(hid, r);
  }
  return g.conv2d(g.silu(hid), g.bind(out_w_, trainable), g.bind(out_b_, trainable), 1, 1);
}

Tensor Denoiser::predict_noise(const Tensor& x_t, const Tensor& cond, const Tensor& modulation, int t,
                               double state_gain) const {
  Graph g;
  const Var out = forward(g, g.constant(x_t), g.constant(cond), modulation, t, false, state_gain);
  return g.value(out);
}

std::vector<Parameter*> Denoiser::parameters() {
  std::vector<Parameter*> ps = temb_.parameters();
  append(ps, std::vector<Parameter*>{&in_w_, &in_b_});
  for (Block& b : blocks_) {
    append(ps, std::vector<Parameter*>{&b.conv_a_w, &b.conv_a_b, &b.film_w, &b.film_b, &b.conv_b_w, &b.conv_b_b});
  }
  append(ps, std::vector<Parameter*>{&out_w_, &out_b_});
  return ps;
}

std::vector<const Parameter*> Denoiser::parameters() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<Denoiser*>(this)->parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> ShadowModel::parameters() {
  std::vector<Parameter*> ps = codec.parameters();
  append(ps, denoiser.parameters());
  return ps;
}

std::vector<const Parameter*> ShadowModel::parameters() const {
  std::vector<const Parameter*> ps = codec.parameters();
  append(ps, denoiser.parameters());
  return ps;
}

Tensor latent_modulation(const SoftMask& mask, Polarity polarity) {
  if (mask.empty()) throw InvalidInput("latent_modulation: empty mask");
  return modulation_field(MaskModulation{polarity, image_to_tensor(block_mean(mask.image(), Codec::kFactor))});
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (patch_size < Codec::kFactor) throw ValidationError("train.patch_size must be >= 4");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
  if (iterations < 0) throw ValidationError("train.iterations must be >= 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("train.lambda must be in [0, 1]");
  if (codec_iterations < 0) throw ValidationError("train.codec_iterations must be >= 0");
  if (!(codec_learning_rate > 0.0)) throw ValidationError("train.codec_learning_rate must be > 0");
  feature_weights.validate();
}

TrainingSample crop_sample(const TrainingSample& s, int patch, Engine& rng) {
  const int h = s.gt.height(), w = s.gt.width();
  if (!s.shadow.same_extent(s.gt) || s.mask.height() != h || s.mask.width() != w) {
    throw InvalidInput("training sample: shadow, gt, and mask sizes differ");
  }
  const int p = std::min({patch, h, w}) / Codec::kFactor * Codec::kFactor;
  if (p < Codec::kFactor) throw InvalidInput("training sample smaller than 4x4");
  const int y0 = uniform_int(rng, 0, h - p), x0 = uniform_int(rng, 0, w - p);
  return TrainingSample{crop(s.shadow, y0, x0, p, p), crop(s.gt, y0, x0, p, p),
                        SoftMask(crop(s.mask.image(), y0, x0, p, p))};
}

Trainer::Trainer(ShadowModel& model, SdeSchedule sched, TrainConfig cfg)
    : model_(model),
      sched_(std::move(sched)),
      cfg_(std::move(cfg)),
      extractor_(cfg_.extractor_seed, model.config.image_channels),
      denoiser_opt_(cfg_.learning_rate),
      codec_opt_(cfg_.codec_learning_rate) {
  cfg_.validate();
  sched_.validate();
}

std::vector<double> Trainer::pretrain_codec(const std::vector<Image>& images) {
  if (images.empty()) throw InvalidInput("pretrain_codec: no images");
  const auto params = model_.codec.parameters();
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(cfg_.codec_iterations));
  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  for (int it = 0; it < cfg_.codec_iterations; ++it, ++codec_step_) {
    std::vector<std::vector<Tensor>> grads(bs);
    std::vector<double> loss(bs);
    parallel_for(bs, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Engine rng = make_engine(derive_seed(cfg_.seed, kCodecBatchStream, static_cast<std::uint64_t>(codec_step_)), i);
        const Image& src = images[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(images.size()) - 1))];
        const TrainingSample cropped =
            crop_sample(TrainingSample{src, src, SoftMask::zeros(src.height(), src.width())}, cfg_.patch_size, rng);
        Graph g;
        const Var x = g.constant(image_to_tensor(cropped.gt));
        const Var y = model_.codec.decode(g, model_.codec.encode(g, x, true), true);
        const Var l = g.mean_abs_diff(y, x);
        g.backward(l);
        loss[i] = g.scalar(l);
        for (Parameter* p : params) grads[i].push_back(g.param_grad(*p));
      }
    });
    double mean = 0.0;
    for (double v : loss) mean += v;
    mean /= static_cast<double>(bs);
    if (!std::isfinite(mean)) throw NumericalDivergence(static_cast<std::size_t>(codec_step_), "non-finite codec reconstruction loss");
    reduce_gradients(params, grads);
    codec_opt_.step(params);
    losses.push_back(mean);
  }
  return losses;
}

LossReport Trainer::sample_loss(const TrainingSample& raw, std::size_t slot, Graph& g,
                                std::vector<Tensor>& grads) const {
  const std::uint64_t key = derive_seed(cfg_.seed, kSampleStream, static_cast<std::uint64_t>(step_));
  Engine rng = make_engine(key, slot);
  const TrainingSample s = crop_sample(raw, cfg_.patch_size, rng);
  const int t = uniform_int(rng, 1, sched_.steps());
  const NoiseStream noise(derive_seed(key, slot), kNoiseStream);

  const Tensor gt_lat = model_.codec.encode(s.gt).latent;
  const Tensor cond = model_.codec.encode(s.shadow).latent;
  const Tensor plane = latent_modulation(s.mask, cfg_.polarity);
  const Tensor mod = expand_modulation(plane, cond.shape());
  const Tensor& x0 = cfg_.swap_endpoints ? cond : gt_lat;
  const Tensor& mu = cfg_.swap_endpoints ? gt_lat : cond;

  const Marginal m = closed_form_marginal(x0, mu, mod, sched_, t);
  const double ustd = sched_.unit_std(t);
  Tensor eps_true(cond.shape());
  Tensor x_t = m.mean;
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    eps_true[i] = mod[i] * noise.normal(static_cast<std::uint64_t>(t), i);
    x_t[i] += ustd * eps_true[i];
  }

  const Var eps_pred = model_.denoiser.forward(g, g.constant(x_t), g.constant(cond), plane, t, true, 1.0 / ustd);
  const Var l_diff = g.mean_abs_diff(eps_pred, g.constant(eps_true));

  // x0 estimate implied by the predicted noise, decoded and compared in feature space.
  const double decay = std::exp(-sched_.reversion_mass(t));
  Tensor offset(x_t.shape());
  for (std::size_t i = 0; i < offset.size(); ++i) offset[i] = mu[i] + (x_t[i] - mu[i]) / decay;
  const Var x0_hat = g.add_const(g.scale(eps_pred, -ustd / decay), offset);
  const Var decoded = model_.codec.decode(g, x0_hat, false);
  const Image& target = cfg_.swap_endpoints ? s.shadow : s.gt;
  const Var l_fea = fea_loss(g, decoded, extractor_.extract(image_to_tensor(target)), cfg_.feature_weights, extractor_);

  // The x0 estimate amplifies noise-prediction error by ustd / decay; weighting the feature
  // term by decay^2 keeps its gradient bounded by ustd.
  const double fea_weight = decay * decay;
  const Var total = g.weighted_sum({l_diff, l_fea}, {cfg_.lambda, (1.0 - cfg_.lambda) * fea_weight});
  g.backward(total);
  for (const Parameter* p : model_.denoiser.parameters()) grads.push_back(g.param_grad(*p));
  LossReport r;
  r.l_diff = g.scalar(l_diff);
  r.l_fea = fea_weight * g.scalar(l_fea);
  r.l_total = total_loss(r.l_diff, r.l_fea, cfg_.lambda);
  return r;
}

LossReport Trainer::train_step(const std::vector<const TrainingSample*>& batch) {
  if (batch.empty()) throw InvalidInput("train_step: empty batch");
  const auto params = model_.denoiser.parameters();
  std::vector<std::vector<Tensor>> grads(batch.size());
  std::vector<LossReport> reports(batch.size());
  parallel_for(batch.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Graph g;
      reports[i] = sample_loss(*batch[i], i, g, grads[i]);
    }
  });
  LossReport mean;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const LossReport& r = reports[i];
    if (!std::isfinite(r.l_total)) {
      throw NumericalDivergence(static_cast<std::size_t>(step_), "non-finite loss for batch slot " + std::to_string(i) +
                                           " (l_diff=" + std::to_string(r.l_diff) +
                                           ", l_fea=" + std::to_string(r.l_fea) + ")");
    }
    mean.l_diff += r.l_diff;
    mean.l_fea += r.l_fea;
  }
  const double n = static_cast<double>(reports.size());
  mean.l_diff /= n;
  mean.l_fea /= n;
  mean.l_total = total_loss(mean.l_diff, mean.l_fea, cfg_.lambda);
  reduce_gradients(params, grads);
  denoiser_opt_.step(params);
  ++step_;
  return mean;
}

std::vector<LossReport> Trainer::train(const std::vector<TrainingSample>& data,
                                       const std::function<void(int, const LossReport&)>& on_step) {
  if (data.empty()) throw InvalidInput("train: no training samples");
  if (cfg_.codec_iterations > 0 && codec_step_ == 0) {
    std::vector<Image> images;
    for (const auto& s : data) {
      images.push_back(s.gt);
      images.push_back(s.shadow);
    }
    pretrain_codec(images);
  }
  std::vector<LossReport> history;
  history.reserve(static_cast<std::size_t>(cfg_.iterations));
  for (int it = 0; it < cfg_.iterations; ++it) {
    Engine rng = make_engine(derive_seed(cfg_.seed, kBatchStream), static_cast<std::uint64_t>(step_));
    std::vector<const TrainingSample*> batch;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      batch.push_back(&data[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(data.size()) - 1))]);
    }
    history.push_back(train_step(batch));
    if (on_step) on_step(it, history.back());
  }
  return history;
}

// ---------------------------------------------------------------- gradient check

GradientCheckResult gradient_check(Denoiser& denoiser, const Tensor& x_t, const Tensor& cond,
                                   const Tensor& modulation, const Tensor& eps_true, int t, double step) {
  const auto params = denoiser.parameters();
  auto loss = [&]() { return diff_loss(denoiser.predict_noise(x_t, cond, modulation, t), eps_true); };

  Graph g;
  const Var out = denoiser.forward(g, g.constant(x_t), g.constant(cond), modulation, t, true);
  g.backward(g.mean_abs_diff(out, g.constant(eps_true)));

  GradientCheckResult res;
  for (Parameter* p : params) {
    const Tensor analytic = g.param_grad(*p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double lp = loss();
      p->value[i] = orig - step;
      const double lm = loss();
      p->value[i] = orig;
      const double numeric = (lp - lm) / (2.0 * step);
      const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
      ++res.checked;
      if (err > res.max_relative_error) {
        res.max_relative_error = err;
        res.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------- inference

Image remove_shadow(const Image& shadow, const ShadowModel& model, const SdeSchedule& sched, const RemoveConfig& cfg) {
  return remove_shadow(shadow, generate_soft_mask(shadow, cfg.ssgm), model, sched, cfg);
}

Image remove_shadow(const Image& shadow, const SoftMask& mask, const ShadowModel& model, const SdeSchedule& sched,
                    const RemoveConfig& cfg) {
  if (mask.height() != shadow.height() || mask.width() != shadow.width()) {
    throw InvalidInput("remove_shadow: mask size differs from image");
  }
  sched.validate();
  if (cfg.samples < 1) throw ValidationError("remove.samples must be >= 1");
  const Encoded enc = model.codec.encode(shadow);
  const Tensor& cond = enc.latent;
  const Tensor plane = latent_modulation(mask, cfg.polarity);
  const Tensor mod = expand_modulation(plane, cond.shape());
  const ScoreProvider score = [&](const Tensor& x, int t) {
    const double ustd = sched.unit_std(t);
    const Tensor eps = model.denoiser.predict_noise(x, cond, plane, t, 1.0 / ustd);
    Tensor s(x.shape());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = (mod[i] > 1e-12 && ustd > 0.0) ? -eps[i] / (mod[i] * mod[i] * ustd) : 0.0;
    }
    return s;
  };
  // Sample 0 uses the seed directly; later samples derive theirs from it.
  const int runs = cfg.reverse_mode == ReverseMode::ProbabilityFlow ? 1 : cfg.samples;
  Image mean;
  for (int r = 0; r < runs; ++r) {
    const NoiseStream noise(r == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(r)), kRemoveStream);
    const Tensor x_T = make_start_state(cond, mod, sched, noise);
    const ReverseTrace trace = reverse_sample(x_T, cond, score, mod, sched, noise, cfg.reverse_mode);
    const Image out = model.codec.decode(trace.x0, enc.height, enc.width);
    if (runs == 1) return out;
    if (r == 0) mean = Image(out.height(), out.width(), out.channels(), 0.0f);
    for (std::size_t i = 0; i < out.size(); ++i) mean.samples()[i] += out.samples()[i] / static_cast<float>(runs);
  }
  return mean;
}

}  // namespace shadowlab
