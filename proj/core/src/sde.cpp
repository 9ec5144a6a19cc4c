#include "shadowlab/sde.hpp"

#include <cmath>
#include <string>

#include "shadowlab/error.hpp"

namespace shadowlab {

namespace {

// Noise key reserved for the start state so it never collides with a step index.
constexpr std::uint64_t kStartStateStep = 0xffffffffULL;

void require_step(const SdeSchedule& s, int t, int lo, int hi, const char* op) {
  if (t < lo || t > hi) {
    throw InvalidInput(std::string(op) + ": step " + std::to_string(t) + " outside [" + std::to_string(lo) +
                       ", " + std::to_string(hi) + "]");
  }
  (void)s;
}

// Per-step variance gain for unit modulation: sigma^2 (1 - e^{-2 theta dt}) / (2 theta),
// with the theta -> 0 limit sigma^2 dt.
double step_variance(double theta, double sigma, double dt) {
  if (theta * dt < 1e-12) return sigma * sigma * dt;
  return sigma * sigma * -std::expm1(-2.0 * theta * dt) / (2.0 * theta);
}

}  // namespace

const char* to_string(Polarity p) noexcept { return p == Polarity::Literal ? "literal" : "prose"; }

Polarity parse_polarity(const std::string& s) {
  if (s == "literal") return Polarity::Literal;
  if (s == "prose") return Polarity::Prose;
  throw ValidationError("unknown polarity '" + s + "' (expected literal|prose)");
}

const char* to_string(ReverseMode m) noexcept {
  return m == ReverseMode::Stochastic ? "stochastic" : "probability-flow";
}

ReverseMode parse_reverse_mode(const std::string& s) {
  if (s == "stochastic") return ReverseMode::Stochastic;
  if (s == "probability-flow" || s == "ode") return ReverseMode::ProbabilityFlow;
  throw ValidationError("unknown reverse mode '" + s + "' (expected stochastic|probability-flow)");
}

void SdeSchedule::validate() const {
  if (theta.empty()) throw ValidationError("sde schedule needs at least one step");
  if (theta.size() != sigma.size()) throw ValidationError("sde theta and sigma arrays differ in length");
  for (double v : theta)
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("sde theta_t must be > 0");
  for (double v : sigma)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("sde sigma_t must be >= 0");
  if (!(dt > 0.0)) throw ValidationError("sde dt must be > 0");
  if (!(terminal_noise_level >= 0.0)) throw ValidationError("sde terminal noise level must be >= 0");
}

double SdeSchedule::reversion_mass(int t) const {
  double m = 0.0;
  for (int s = 0; s < t; ++s) m += theta[static_cast<std::size_t>(s)] * dt;
  return m;
}

double SdeSchedule::unit_variance(int t) const {
  double v = 0.0;
  for (int s = 0; s < t; ++s) {
    const double th = theta[static_cast<std::size_t>(s)];
    v = v * std::exp(-2.0 * th * dt) + step_variance(th, sigma[static_cast<std::size_t>(s)], dt);
  }
  return v;
}

double SdeSchedule::unit_std(int t) const { return std::sqrt(unit_variance(t)); }

SdeSchedule SdeSchedule::constant(int steps, double theta, double sigma, double dt) {
  if (steps < 1) throw ValidationError("sde steps must be >= 1");
  SdeSchedule s;
  s.theta.assign(static_cast<std::size_t>(steps), theta);
  s.sigma.assign(static_cast<std::size_t>(steps), sigma);
  s.dt = dt;
  s.terminal_noise_level = std::sqrt(s.unit_variance(steps));
  return s;
}

SdeSchedule SdeSchedule::make_default(int steps, double noise_level, double total_reversion) {
  if (steps < 1) throw ValidationError("sde steps must be >= 1");
  if (!(total_reversion > 0.0)) throw ValidationError("sde total reversion must be > 0");
  const double dt = 1.0 / steps;
  const double theta = total_reversion;
  const double sigma = std::sqrt(2.0 * theta * noise_level * noise_level / -std::expm1(-2.0 * total_reversion));
  SdeSchedule s = constant(steps, theta, sigma, dt);
  s.terminal_noise_level = noise_level;
  return s;
}

Tensor modulation_field(const MaskModulation& mod) {
  Tensor out = mod.mask;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = mod.mask[i];
    if (!(m >= 0.0 && m <= 1.0)) throw InvalidInput("modulation_field: mask value outside [0, 1]");
    out[i] = mod.polarity == Polarity::Literal ? 1.0 - m : m;
  }
  return out;
}

Tensor expand_modulation(const Tensor& field, const std::vector<int>& state_shape) {
  if (state_shape.size() != 3) throw InvalidInput("expand_modulation: state must be [C, H, W]");
  const int c = state_shape[0], h = state_shape[1], w = state_shape[2];
  const bool plane = (field.rank() == 2 && field.dim(0) == h && field.dim(1) == w) ||
                     (field.rank() == 3 && field.dim(0) == 1 && field.dim(1) == h && field.dim(2) == w);
  if (field.shape() == state_shape) return field;
  if (!plane) {
    throw InvalidInput("expand_modulation: field " + shape_string(field.shape()) + " does not fit state " +
                       shape_string(state_shape));
  }
  Tensor out(state_shape);
  const auto hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (int k = 0; k < c; ++k)
    for (std::size_t i = 0; i < hw; ++i) out[static_cast<std::size_t>(k) * hw + i] = field[i];
  return out;
}

Tensor forward_step(const Tensor& x, const Tensor& mu, const Tensor& mod, const SdeSchedule& sched, int t,
                    const NoiseStream& noise, Integrator integrator) {
  require_same_shape(x, mu, "forward_step");
  require_same_shape(x, mod, "forward_step");
  require_step(sched, t, 0, sched.steps() - 1, "forward_step");
  const double th = sched.theta[static_cast<std::size_t>(t)];
  const double sg = sched.sigma[static_cast<std::size_t>(t)];
  const double dt = sched.dt;
  Tensor out(x.shape());
  const auto step = static_cast<std::uint64_t>(t);
  if (integrator == Integrator::EulerMaruyama) {
    const double amp = sg * std::sqrt(dt);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = mod[i] != 0.0 ? noise.normal(step, i) : 0.0;
      out[i] = x[i] + th * (mu[i] - x[i]) * dt + amp * mod[i] * xi;
    }
  } else {
    const double decay = std::exp(-th * dt);
    const double amp = std::sqrt(step_variance(th, sg, dt));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = mod[i] != 0.0 ? noise.normal(step, i) : 0.0;
      out[i] = mu[i] + (x[i] - mu[i]) * decay + amp * mod[i] * xi;
    }
  }
  return out;
}

Marginal closed_form_marginal(const Tensor& x0, const Tensor& mu, const Tensor& mod, const SdeSchedule& sched,
                              int t) {
  require_same_shape(x0, mu, "closed_form_marginal");
  require_same_shape(x0, mod, "closed_form_marginal");
  require_step(sched, t, 0, sched.steps(), "closed_form_marginal");
  const double decay = std::exp(-sched.reversion_mass(t));
  const double v = sched.unit_variance(t);
  Marginal m{Tensor(x0.shape()), Tensor(x0.shape())};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    m.mean[i] = mu[i] + (x0[i] - mu[i]) * decay;
    m.variance[i] = v * mod[i] * mod[i];
  }
  return m;
}

Tensor make_start_state(const Tensor& input, const Tensor& mod, const SdeSchedule& sched, const NoiseStream& noise) {
  require_same_shape(input, mod, "make_start_state");
  Tensor out = input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mod[i] != 0.0) out[i] += sched.terminal_noise_level * mod[i] * noise.normal(kStartStateStep, i);
  }
  return out;
}

Tensor oracle_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, const Tensor& mod,
                    const SdeSchedule& sched, int t) {
  require_same_shape(x_t, x0, "oracle_score");
  const Marginal m = closed_form_marginal(x0, mu, mod, sched, t);
  Tensor score(x_t.shape());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    score[i] = m.variance[i] > 0.0 ? -(x_t[i] - m.mean[i]) / m.variance[i] : 0.0;
  }
  return score;
}

Tensor reverse_step(const Tensor& x, const Tensor& mu, const Tensor& score, const Tensor& mod,
                    const SdeSchedule& sched, int t, const NoiseStream& noise, ReverseMode mode) {
  require_same_shape(x, mu, "reverse_step");
  require_same_shape(x, score, "reverse_step");
  require_same_shape(x, mod, "reverse_step");
  require_step(sched, t, 1, sched.steps(), "reverse_step");
  const double th = sched.theta[static_cast<std::size_t>(t - 1)];
  const double sg = sched.sigma[static_cast<std::size_t>(t - 1)];
  const double dt = sched.dt;
  const bool stochastic = mode == ReverseMode::Stochastic;
  const double score_coef = stochastic ? sg * sg : 0.5 * sg * sg;
  const double amp = sg * std::sqrt(dt);
  const auto step = static_cast<std::uint64_t>(t);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = mod[i];
    const double drift = th * (mu[i] - x[i]) - score_coef * m * m * score[i];
    double v = x[i] - drift * dt;
    if (stochastic && m != 0.0) v += amp * m * noise.normal(step, i);
    out[i] = v;
  }
  return out;
}

ReverseTrace reverse_sample(const Tensor& x_T, const Tensor& mu, const ScoreProvider& score, const Tensor& mod,
                            const SdeSchedule& sched, const NoiseStream& noise, ReverseMode mode) {
  sched.validate();
  ReverseTrace trace;
  trace.x0 = x_T;
  trace.state_norms.reserve(static_cast<std::size_t>(sched.steps()) + 1);
  trace.state_norms.push_back(x_T.l2_norm());
  for (int t = sched.steps(); t >= 1; --t) {
    const Tensor s = score(trace.x0, t);
    trace.x0 = reverse_step(trace.x0, mu, s, mod, sched, t, noise, mode);
    const double norm = trace.x0.l2_norm();
    if (!std::isfinite(norm)) {
      throw NumericalDivergence(static_cast<std::size_t>(t), "reverse_sample: non-finite state");
    }
    trace.state_norms.push_back(norm);
  }
  return trace;
}

}  // namespace shadowlab
