#include "shadowlab_cli/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"

namespace shadowlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    const ModelConfig m;
    const TrainConfig t;
    const SynthConfig s;
    const SsgmConfig g;
    const SdeVerifyConfig v;
    return std::vector<ConfigKey>{
        {"seed", "0", "master seed for every random stream"},
        {"ssgm.dark_fraction", fmt(g.dark_fraction), "fraction a of darkest pixels averaged for p_mean"},
        {"ssgm.dilate_radius", std::to_string(g.filters.dilate_radius), "dilation radius (window 2r+1)"},
        {"ssgm.median_radius_pre", std::to_string(g.filters.median_radius_pre), "median radius after dilation"},
        {"ssgm.median_radius_post", std::to_string(g.filters.median_radius_post), "median radius after normalization"},
        {"ssgm.invert_to_convention", "true", "map the darkest pixels to 1"},
        {"ssgm.degenerate_eps", fmt(g.degenerate_eps), "minimum background contrast before reporting no shadow"},
        {"synth.count", "16", "number of samples to generate"},
        {"synth.output_size", std::to_string(s.output_size), "square output side in pixels"},
        {"synth.mode", "literal", "compositing mode: literal|attenuated"},
        {"synth.weight_min", fmt(s.weight.lo), "lower bound of the blend weight a"},
        {"synth.weight_max", fmt(s.weight.hi), "upper bound of the blend weight a"},
        {"synth.color_min", fmt(s.color[0].lo), "lower bound of each shadow color channel"},
        {"synth.color_max", fmt(s.color[0].hi), "upper bound of each shadow color channel"},
        {"synth.gt_scale_min", fmt(s.gt_scale.lo), "page zoom lower bound"},
        {"synth.gt_scale_max", fmt(s.gt_scale.hi), "page zoom upper bound"},
        {"synth.gt_rotation_min", fmt(s.gt_rotation_deg.lo), "page rotation lower bound in degrees"},
        {"synth.gt_rotation_max", fmt(s.gt_rotation_deg.hi), "page rotation upper bound in degrees"},
        {"synth.mask_scale_min", fmt(s.mask_scale.lo), "template zoom lower bound"},
        {"synth.mask_scale_max", fmt(s.mask_scale.hi), "template zoom upper bound"},
        {"synth.mask_rotation_min", fmt(s.mask_rotation_deg.lo), "template rotation lower bound in degrees"},
        {"synth.mask_rotation_max", fmt(s.mask_rotation_deg.hi), "template rotation upper bound in degrees"},
        {"synth.toy_sources", "8", "procedural pages and templates made by synth --toy"},
        {"synth.toy_size", "0", "side of procedural sources; 0 uses output_size * 5/4"},
        {"sde.steps", "100", "number of diffusion steps T"},
        {"sde.noise_level", "50", "terminal noise std on the 0-255 scale"},
        {"sde.reversion_mass", "4", "total reversion Theta_T of the constant theta schedule"},
        {"sde.theta", "", "explicit comma-separated theta_t list (overrides the default schedule)"},
        {"sde.sigma", "", "explicit comma-separated sigma_t list, paired with sde.theta"},
        {"sde.polarity", "prose", "modulation polarity: prose (m = mask) | literal (m = 1 - mask)"},
        {"sde.reverse_mode", "stochastic", "reverse sampler: stochastic|probability-flow"},
        {"model.codec_hidden", std::to_string(m.codec_hidden), "codec hidden channels"},
        {"model.latent_channels", std::to_string(m.latent_channels), "latent channels"},
        {"model.width", std::to_string(m.width), "denoiser feature width"},
        {"model.blocks", std::to_string(m.blocks), "denoiser residual blocks"},
        {"model.time_dim", std::to_string(m.time_dim), "time embedding width"},
        {"train.patch_size", std::to_string(t.patch_size), "training crop side"},
        {"train.batch_size", std::to_string(t.batch_size), "samples per step"},
        {"train.learning_rate", fmt(t.learning_rate), "denoiser Adam learning rate"},
        {"train.iterations", std::to_string(t.iterations), "denoiser steps"},
        {"train.lambda", fmt(t.lambda), "weight of L_diff; L_fea gets 1 - lambda"},
        {"train.codec_iterations", std::to_string(t.codec_iterations), "autoencoder pretraining steps"},
        {"train.codec_learning_rate", fmt(t.codec_learning_rate), "autoencoder Adam learning rate"},
        {"train.swap_endpoints", "false", "train toward the shadow-free latent as mu"},
        {"train.mask_source", "gt", "soft-mask used in training: gt (dataset masks) | ssgm"},
        {"train.log_every", "100", "loss log interval in steps; 0 disables"},
        {"train.feature_weights", "0.1,0.1,0.2,0.3,0.3", "per-slice feature loss weights"},
        {"remove.samples", "1", "stochastic runs averaged per image"},
        {"hist.bins", "256", "histogram bins per HSV channel"},
        {"verify.paths", std::to_string(v.paths), "Monte-Carlo paths for the marginal suite"},
        {"verify.recovery_seeds", std::to_string(v.recovery_seeds), "fields in the oracle-recovery suite"},
        {"verify.field_size", std::to_string(v.field_size), "side of each recovery field"},
    };
  }();
  return keys;
}

CliConfig::CliConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void CliConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown configuration key '" + key + "'");
  it->second = value;
}

void CliConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void CliConfig::load_file(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::string& CliConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown configuration key '" + key + "'");
  return it->second;
}

double CliConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(key + ": expected a number, got '" + s + "'");
}

long long CliConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ValidationError(key + ": expected an integer, got '" + s + "'");
  return v;
}

bool CliConfig::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError(key + ": expected true|false, got '" + s + "'");
}

std::uint64_t CliConfig::seed() const {
  const std::string& s = get("seed");
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ValidationError("seed: expected an unsigned 64-bit integer, got '" + s + "'");
  return v;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(key + ": bad list entry '" + item + "'");
    }
  }
  return out;
}

namespace {
int to_int(const CliConfig& c, const std::string& key) {
  const long long v = c.get_int(key);
  if (v < -2147483647LL || v > 2147483647LL) throw ValidationError(key + ": out of range");
  return static_cast<int>(v);
}
}  // namespace

SsgmConfig CliConfig::ssgm() const {
  SsgmConfig g;
  g.dark_fraction = get_double("ssgm.dark_fraction");
  g.filters.dilate_radius = to_int(*this, "ssgm.dilate_radius");
  g.filters.median_radius_pre = to_int(*this, "ssgm.median_radius_pre");
  g.filters.median_radius_post = to_int(*this, "ssgm.median_radius_post");
  g.invert_to_convention = get_bool("ssgm.invert_to_convention");
  g.degenerate_eps = get_double("ssgm.degenerate_eps");
  g.validate();
  return g;
}

SynthConfig CliConfig::synth() const {
  SynthConfig s;
  s.seed = seed();
  s.output_size = to_int(*this, "synth.output_size");
  s.mode = parse_composite_mode(get("synth.mode"));
  s.weight = {get_double("synth.weight_min"), get_double("synth.weight_max")};
  const Interval color{get_double("synth.color_min"), get_double("synth.color_max")};
  s.color = {color, color, color};
  s.gt_scale = {get_double("synth.gt_scale_min"), get_double("synth.gt_scale_max")};
  s.gt_rotation_deg = {get_double("synth.gt_rotation_min"), get_double("synth.gt_rotation_max")};
  s.mask_scale = {get_double("synth.mask_scale_min"), get_double("synth.mask_scale_max")};
  s.mask_rotation_deg = {get_double("synth.mask_rotation_min"), get_double("synth.mask_rotation_max")};
  s.validate();
  if (get_int("synth.count") < 1) throw ValidationError("synth.count must be >= 1");
  if (get_int("synth.toy_sources") < 1) throw ValidationError("synth.toy_sources must be >= 1");
  if (const auto n = get_int("synth.toy_size"); n != 0 && n < 16)
    throw ValidationError("synth.toy_size must be 0 or >= 16");
  return s;
}

SdeSchedule CliConfig::schedule() const {
  const std::string& theta = get("sde.theta");
  const std::string& sigma = get("sde.sigma");
  SdeSchedule sched;
  if (theta.empty() && sigma.empty()) {
    const auto steps = get_int("sde.steps");
    if (steps < 1 || steps > 100000) throw ValidationError("sde.steps must be in [1, 100000]");
    const double noise = get_double("sde.noise_level");
    if (!(noise > 0.0)) throw ValidationError("sde.noise_level must be > 0");
    const double mass = get_double("sde.reversion_mass");
    if (!(mass > 0.0)) throw ValidationError("sde.reversion_mass must be > 0");
    sched = SdeSchedule::make_default(static_cast<int>(steps), noise / 255.0, mass);
  } else {
    sched.theta = parse_double_list("sde.theta", theta);
    sched.sigma = parse_double_list("sde.sigma", sigma);
    if (sched.theta.size() != sched.sigma.size())
      throw ValidationError("sde.theta and sde.sigma must have the same length");
    sched.dt = 1.0 / static_cast<double>(sched.theta.size());
    sched.terminal_noise_level = get_double("sde.noise_level") / 255.0;
  }
  sched.validate();
  return sched;
}

Polarity CliConfig::polarity() const { return parse_polarity(get("sde.polarity")); }

ReverseMode CliConfig::reverse_mode() const { return parse_reverse_mode(get("sde.reverse_mode")); }

ModelConfig CliConfig::model() const {
  ModelConfig m;
  m.codec_hidden = to_int(*this, "model.codec_hidden");
  m.latent_channels = to_int(*this, "model.latent_channels");
  m.width = to_int(*this, "model.width");
  m.blocks = to_int(*this, "model.blocks");
  m.time_dim = to_int(*this, "model.time_dim");
  m.seed = seed();
  m.validate();
  return m;
}

TrainConfig CliConfig::train() const {
  TrainConfig t;
  t.patch_size = to_int(*this, "train.patch_size");
  t.batch_size = to_int(*this, "train.batch_size");
  t.learning_rate = get_double("train.learning_rate");
  t.iterations = to_int(*this, "train.iterations");
  t.seed = seed();
  t.lambda = get_double("train.lambda");
  t.codec_iterations = to_int(*this, "train.codec_iterations");
  t.codec_learning_rate = get_double("train.codec_learning_rate");
  t.polarity = polarity();
  t.swap_endpoints = get_bool("train.swap_endpoints");
  const auto w = parse_double_list("train.feature_weights", get("train.feature_weights"));
  if (w.size() != t.feature_weights.w.size())
    throw ValidationError("train.feature_weights needs " + std::to_string(t.feature_weights.w.size()) + " entries");
  for (std::size_t i = 0; i < w.size(); ++i) t.feature_weights.w[i] = w[i];
  t.validate();
  const std::string& src = get("train.mask_source");
  if (src != "gt" && src != "ssgm") throw ValidationError("train.mask_source must be gt|ssgm, got '" + src + "'");
  if (get_int("train.log_every") < 0) throw ValidationError("train.log_every must be >= 0");
  return t;
}

SdeVerifyConfig CliConfig::verify() const {
  SdeVerifyConfig v;
  v.seed = seed();
  v.paths = to_int(*this, "verify.paths");
  v.recovery_seeds = to_int(*this, "verify.recovery_seeds");
  v.field_size = to_int(*this, "verify.field_size");
  v.steps = to_int(*this, "sde.steps");
  v.noise_level = get_double("sde.noise_level") / 255.0;
  v.total_reversion = get_double("sde.reversion_mass");
  v.reverse_mode = reverse_mode();
  v.validate();
  return v;
}

int CliConfig::remove_samples() const {
  const int n = to_int(*this, "remove.samples");
  if (n < 1) throw ValidationError("remove.samples must be >= 1");
  return n;
}

int CliConfig::hist_bins() const {
  const int bins = to_int(*this, "hist.bins");
  if (bins < 2) throw ValidationError("hist.bins must be >= 2");
  return bins;
}

void CliConfig::validate() const {
  (void)seed();
  (void)ssgm();
  (void)synth();
  (void)schedule();
  (void)polarity();
  (void)reverse_mode();
  (void)model();
  (void)train();
  (void)verify();
  (void)remove_samples();
  (void)hist_bins();
}

std::string CliConfig::to_text() const {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + values_.at(k.name) + "\n";
  return out;
}

}  // namespace shadowlab::cli
