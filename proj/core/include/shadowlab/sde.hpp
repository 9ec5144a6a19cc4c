#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shadowlab/random.hpp"
#include "shadowlab/tensor.hpp"

namespace shadowlab {

// Mean-reverting SDE  dx = theta_t (mu - x) dt + sigma_t m(x) dw  with a per-element
// modulation m derived from the shadow soft-mask.

enum class Polarity {
  Literal,  // m = 1 - mask: noise outside the shadow
  Prose,    // m = mask: noise concentrated in the shadow
};
enum class Integrator { EulerMaruyama, ExactOu };
enum class ReverseMode { Stochastic, ProbabilityFlow };

const char* to_string(Polarity p) noexcept;
Polarity parse_polarity(const std::string& s);
const char* to_string(ReverseMode m) noexcept;
ReverseMode parse_reverse_mode(const std::string& s);

struct SdeSchedule {
  std::vector<double> theta;  // per-step reversion rate, > 0
  std::vector<double> sigma;  // per-step volatility, >= 0
  double dt = 0.01;
  double terminal_noise_level = 50.0 / 255.0;  // std in unit intensities

  int steps() const noexcept { return static_cast<int>(theta.size()); }
  void validate() const;

  // Theta_t = sum_{s<t} theta_s dt.
  double reversion_mass(int t) const;
  // Marginal variance after t steps for a unit modulation, via the exact OU recursion.
  double unit_variance(int t) const;
  double unit_std(int t) const;

  static SdeSchedule constant(int steps, double theta, double sigma, double dt);
  // Constant theta with total reversion mass `total_reversion` over [0, 1], dt = 1/steps,
  // and sigma chosen so the terminal unit-modulation std equals noise_level.
  static SdeSchedule make_default(int steps = 100, double noise_level = 50.0 / 255.0, double total_reversion = 4.0);
};

struct MaskModulation {
  Polarity polarity = Polarity::Prose;
  Tensor mask;  // values in [0, 1]
};

// (1 - mask) for Literal, mask for Prose; same shape as the mask.
Tensor modulation_field(const MaskModulation& mod);

// Broadcasts a [H, W] or [1, H, W] field across the channels of a [C, H, W] state.
Tensor expand_modulation(const Tensor& field, const std::vector<int>& state_shape);

Tensor forward_step(const Tensor& x, const Tensor& mu, const Tensor& mod, const SdeSchedule& sched, int t,
                    const NoiseStream& noise, Integrator integrator = Integrator::EulerMaruyama);

struct Marginal {
  Tensor mean;
  Tensor variance;
};

Marginal closed_form_marginal(const Tensor& x0, const Tensor& mu, const Tensor& mod, const SdeSchedule& sched, int t);

// x_T = input + terminal_noise_level * mod * xi.
Tensor make_start_state(const Tensor& input, const Tensor& mod, const SdeSchedule& sched, const NoiseStream& noise);

// Exact Gaussian score of the closed-form marginal; 0 where the variance is 0.
Tensor oracle_score(const Tensor& x_t, const Tensor& x0, const Tensor& mu, const Tensor& mod,
                    const SdeSchedule& sched, int t);

// One Euler step of the reverse-time SDE from t to t - 1 (1 <= t <= T).
Tensor reverse_step(const Tensor& x, const Tensor& mu, const Tensor& score, const Tensor& mod,
                    const SdeSchedule& sched, int t, const NoiseStream& noise,
                    ReverseMode mode = ReverseMode::Stochastic);

using ScoreProvider = std::function<Tensor(const Tensor& x_t, int t)>;

struct ReverseTrace {
  Tensor x0;
  std::vector<double> state_norms;  // norm after each step, index 0 is the start state
};

// Iterates reverse_step from t = T down to 1. Throws NumericalDivergence naming the step.
ReverseTrace reverse_sample(const Tensor& x_T, const Tensor& mu, const ScoreProvider& score, const Tensor& mod,
                            const SdeSchedule& sched, const NoiseStream& noise,
                            ReverseMode mode = ReverseMode::Stochastic);

}  // namespace shadowlab
