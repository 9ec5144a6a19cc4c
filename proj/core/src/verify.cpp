#include "shadowlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "shadowlab/error.hpp"
#include "shadowlab/parallel.hpp"
#include "shadowlab/random.hpp"

namespace shadowlab {

namespace {

constexpr std::uint64_t kMarginalStream = 0x3a61;
constexpr std::uint64_t kRecoveryStream = 0x7ec0;

double field_psnr(const Tensor& a, const Tensor& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
  mse /= static_cast<double>(a.size());
  return mse == 0.0 ? 100.0 : std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

void SdeVerifyConfig::validate() const {
  if (paths < 2) throw ValidationError("verify.paths must be >= 2");
  if (recovery_seeds < 1) throw ValidationError("verify.recovery_seeds must be >= 1");
  if (field_size < 4) throw ValidationError("verify.field_size must be >= 4");
  if (steps < 4 || steps % 4 != 0) throw ValidationError("verify.steps must be a positive multiple of 4");
}

bool SdeVerifyReport::passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

std::string SdeVerifyReport::to_text() const {
  std::ostringstream os;
  char buf[256];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof(buf), "%-32s value=%.6g bound=%.6g %s\n", c.name.c_str(), c.value, c.bound,
                  c.passed ? "PASS" : "FAIL");
    os << buf;
  }
  os << (passed() ? "overall PASS\n" : "overall FAIL\n");
  return os.str();
}

RecoveryFixture make_recovery_fixture(int size, std::uint64_t seed) {
  Engine rng = make_engine(seed, kRecoveryStream);
  const std::vector<int> shape{1, size, size};
  RecoveryFixture f{Tensor(shape), Tensor(shape), Tensor(shape)};
  const double cy = uniform_in(rng, 0.3, 0.7) * size, cx = uniform_in(rng, 0.3, 0.7) * size;
  const double radius = uniform_in(rng, 0.2, 0.35) * size, soft = 0.1 * size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
      const double m = std::clamp((radius - d) / soft, 0.0, 1.0);
      const double mu = uniform_in(rng, 0.1, 0.6);
      const double clean = uniform_in(rng, 0.4, 1.0);
      f.mod.at(0, y, x) = m;
      f.mu.at(0, y, x) = mu;
      f.x0.at(0, y, x) = mu + m * (clean - mu);
    }
  return f;
}

SdeVerifyReport verify_sde(const SdeVerifyConfig& cfg) {
  cfg.validate();
  SdeVerifyReport report;

  // Marginal suite.
  {
    const double theta = 1.0, sigma = 0.5;
    const SdeSchedule sched = SdeSchedule::constant(cfg.steps, theta, sigma, 1.0 / cfg.steps);
    const std::vector<int> shape{cfg.paths};
    const Tensor mu(shape, 0.0), mod(shape, 1.0);
    Tensor x(shape, 1.0);
    const NoiseStream noise(cfg.seed, kMarginalStream);
    const double n = cfg.paths;
    for (int t = 0; t < cfg.steps; ++t) {
      x = forward_step(x, mu, mod, sched, t, noise);
      const int done = t + 1;
      if (done * 4 != cfg.steps && done * 2 != cfg.steps && done != cfg.steps) continue;
      const Marginal m = closed_form_marginal(Tensor({1}, 1.0), Tensor({1}, 0.0), Tensor({1}, 1.0), sched, done);
      double mean = 0.0;
      for (double v : x.values()) mean += v;
      mean /= n;
      double var = 0.0, m4 = 0.0;
      for (double v : x.values()) {
        const double d = v - mean;
        var += d * d;
        m4 += d * d * d * d;
      }
      var /= n - 1.0;
      m4 /= n;
      const double se_mean = std::sqrt(m.variance[0] / n);
      const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / n);
      char tag[32];
      std::snprintf(tag, sizeof(tag), "t=%.2f", static_cast<double>(done) / cfg.steps);
      const double z_mean = std::abs(mean - m.mean[0]) / se_mean;
      const double z_var = std::abs(var - m.variance[0]) / se_var;
      report.checks.push_back({std::string("marginal mean |z| ") + tag, z_mean, 3.0, z_mean <= 3.0});
      report.checks.push_back({std::string("marginal var |z| ") + tag, z_var, 3.0, z_var <= 3.0});
    }
  }

  // Oracle-recovery suite.
  {
    const SdeSchedule sched = SdeSchedule::make_default(cfg.steps, cfg.noise_level, cfg.total_reversion);
    const auto seeds = static_cast<std::size_t>(cfg.recovery_seeds);
    std::vector<double> psnrs(seeds), zero_err(seeds);
    parallel_for(seeds, [&](std::size_t begin, std::size_t end) {
      for (std::size_t s = begin; s < end; ++s) {
        const std::uint64_t key = derive_seed(cfg.seed, s);
        const RecoveryFixture f = make_recovery_fixture(cfg.field_size, key);
        const NoiseStream noise(key, kRecoveryStream);
        const Tensor x_T = make_start_state(f.mu, f.mod, sched, noise);
        const ScoreProvider score = [&](const Tensor& x, int t) { return oracle_score(x, f.x0, f.mu, f.mod, sched, t); };
        const ReverseTrace tr = reverse_sample(x_T, f.mu, score, f.mod, sched, noise, cfg.reverse_mode);
        psnrs[s] = field_psnr(tr.x0, f.x0);
        double worst = 0.0;
        for (std::size_t i = 0; i < f.mod.size(); ++i)
          if (f.mod[i] == 0.0) worst = std::max(worst, std::abs(tr.x0[i] - f.x0[i]));
        zero_err[s] = worst;
      }
    });
    double mean_psnr = 0.0;
    for (double p : psnrs) mean_psnr += p;
    mean_psnr /= static_cast<double>(seeds);
    const double worst = *std::max_element(zero_err.begin(), zero_err.end());
    report.checks.push_back({"oracle recovery mean PSNR dB", mean_psnr, 30.0, mean_psnr >= 30.0});
    report.checks.push_back({"modulation-zero max error", worst, 1e-9, worst < 1e-9});
  }
  return report;
}

}  // namespace shadowlab
