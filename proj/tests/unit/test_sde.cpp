#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/sde.hpp"

using namespace shadowlab;

namespace {

Tensor filled(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }

}  // namespace

TEST_SUITE("sde") {
  TEST_CASE("modulation_field: polarity definitions") {
    const Tensor zero = filled({4, 4}, 0.0);
    CHECK(modulation_field({Polarity::Literal, zero}) == filled({4, 4}, 1.0));
    CHECK(modulation_field({Polarity::Prose, zero}) == zero);
    const Tensor q = filled({2, 2}, 0.25);
    CHECK(modulation_field({Polarity::Literal, q}) == filled({2, 2}, 0.75));
    CHECK(modulation_field({Polarity::Prose, q}) == q);
    CHECK_THROWS_AS(modulation_field({Polarity::Prose, filled({1, 1}, 1.5)}), InvalidInput);
  }

  TEST_CASE("forward_step: frozen and pure-drift cases") {
    const Tensor x = fixtures::random_tensor({2, 3, 3}, 1);
    const Tensor mod = filled({2, 3, 3}, 1.0);
    const NoiseStream noise(5, 6);
    const SdeSchedule still = SdeSchedule::constant(1, 0.0, 0.0, 0.1);
    CHECK(forward_step(x, filled({2, 3, 3}, 3.0), mod, still, 0, noise) == x);

    const SdeSchedule drift = SdeSchedule::constant(1, 1.0, 0.0, 1.0);
    CHECK(forward_step(filled({1, 2, 2}, 0.0), filled({1, 2, 2}, 1.0), filled({1, 2, 2}, 1.0), drift, 0, noise) ==
          filled({1, 2, 2}, 1.0));
  }

  TEST_CASE("closed_form_marginal: t = 0, zero volatility, stationary limit, analytic OU") {
    const Tensor x0 = fixtures::random_tensor({1, 4, 4}, 2);
    const Tensor mu = fixtures::random_tensor({1, 4, 4}, 3);
    const Tensor mod = filled({1, 4, 4}, 1.0);
    const SdeSchedule s = SdeSchedule::constant(100, 1.0, 0.5, 0.01);

    const Marginal m0 = closed_form_marginal(x0, mu, mod, s, 0);
    for (std::size_t i = 0; i < x0.size(); ++i) CHECK(m0.mean[i] == doctest::Approx(x0[i]).epsilon(1e-15));
    CHECK(m0.variance == filled({1, 4, 4}, 0.0));

    const SdeSchedule calm = SdeSchedule::constant(100, 1.0, 0.0, 0.01);
    const Marginal mc = closed_form_marginal(x0, mu, mod, calm, 50);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      CHECK(mc.variance[i] == 0.0);
      CHECK(mc.mean[i] == doctest::Approx(mu[i] + (x0[i] - mu[i]) * std::exp(-0.5)).epsilon(1e-12));
    }

    // Continuous-time OU: var = sigma^2 / (2 theta) (1 - e^{-2 theta t}).
    for (int t : {25, 50, 100}) {
      const double tt = t * 0.01;
      CHECK(s.unit_variance(t) == doctest::Approx(0.125 * (1.0 - std::exp(-2.0 * tt))).epsilon(1e-12));
    }

    const SdeSchedule longrun = SdeSchedule::constant(4000, 1.0, 0.5, 0.01);
    CHECK(longrun.unit_variance(4000) == doctest::Approx(0.5 * 0.5 / 2.0).epsilon(1e-12));
  }

  TEST_CASE("default schedule hits the terminal noise level") {
    const SdeSchedule s = SdeSchedule::make_default();
    CHECK(s.steps() == 100);
    CHECK(s.dt == doctest::Approx(0.01));
    CHECK(s.unit_std(100) == doctest::Approx(50.0 / 255.0).epsilon(1e-12));
    CHECK(s.reversion_mass(100) == doctest::Approx(4.0).epsilon(1e-12));
  }

  TEST_CASE("Euler-Maruyama paths match the marginal within 3 standard errors") {
    const int paths = 10000;
    const Tensor x0 = filled({1, 1, paths}, 1.0);
    const Tensor mu = filled({1, 1, paths}, 0.0);
    const Tensor mod = filled({1, 1, paths}, 1.0);
    const SdeSchedule s = SdeSchedule::constant(100, 1.0, 0.5, 0.01);
    const NoiseStream noise(99, 1);
    Tensor x = x0;
    for (int t = 0; t < 100; ++t) x = forward_step(x, mu, mod, s, t, noise);
    const Marginal m = closed_form_marginal(x0, mu, mod, s, 100);
    double mean = 0.0, var = 0.0;
    for (double v : x.values()) mean += v / paths;
    for (double v : x.values()) var += (v - mean) * (v - mean) / (paths - 1);
    const double se_mean = std::sqrt(m.variance[0] / paths);
    const double se_var = m.variance[0] * std::sqrt(2.0 / (paths - 1));
    CHECK(std::abs(mean - m.mean[0]) <= 3.0 * se_mean);
    CHECK(std::abs(var - m.variance[0]) <= 3.0 * se_var);
  }

  TEST_CASE("make_start_state: zero modulation, sample std, determinism") {
    const SdeSchedule s = SdeSchedule::make_default();
    const Tensor input = fixtures::random_tensor({1, 8, 8}, 4);
    CHECK(make_start_state(input, filled({1, 8, 8}, 0.0), s, NoiseStream(1, 2)) == input);

    const Tensor big = filled({1, 400, 400}, 0.3);
    const Tensor xt = make_start_state(big, filled({1, 400, 400}, 1.0), s, NoiseStream(3, 4));
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < xt.size(); ++i) {
      const double d = xt[i] - big[i];
      sum += d;
      sq += d * d;
    }
    const double n = static_cast<double>(xt.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    // std of a sample std is about sd / sqrt(2n) = 0.0003 here.
    CHECK(std::abs(sd - 50.0 / 255.0) < 0.0015);

    CHECK(make_start_state(input, filled({1, 8, 8}, 1.0), s, NoiseStream(7, 8)) ==
          make_start_state(input, filled({1, 8, 8}, 1.0), s, NoiseStream(7, 8)));
  }

  TEST_CASE("oracle_score: mean, unit displacement, log-density finite difference") {
    const SdeSchedule s = SdeSchedule::make_default();
    const Tensor x0 = fixtures::random_tensor({1, 3, 3}, 5);
    const Tensor mu = fixtures::random_tensor({1, 3, 3}, 6);
    const Tensor mod = fixtures::random_tensor({1, 3, 3}, 7, 0.2, 1.0);
    const int t = 40;
    const Marginal m = closed_form_marginal(x0, mu, mod, s, t);
    CHECK(oracle_score(m.mean, x0, mu, mod, s, t) == filled({1, 3, 3}, 0.0));

    Tensor shifted = m.mean;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += m.variance[i];
    const Tensor unit = oracle_score(shifted, x0, mu, mod, s, t);
    for (double v : unit.values()) CHECK(v == doctest::Approx(-1.0).epsilon(1e-9));

    const Tensor x = fixtures::random_tensor({1, 3, 3}, 8);
    const Tensor score = oracle_score(x, x0, mu, mod, s, t);
    auto log_density = [&](std::size_t i, double xi) {
      const double d = xi - m.mean[i];
      return -0.5 * std::log(2.0 * std::numbers::pi * m.variance[i]) - d * d / (2.0 * m.variance[i]);
    };
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double h = 1e-5;
      const double fd = (log_density(i, x[i] + h) - log_density(i, x[i] - h)) / (2.0 * h);
      CHECK(std::abs(fd - score[i]) <= 1e-4 * std::abs(score[i]) + 1e-9);
    }

    CHECK(oracle_score(x, x0, mu, filled({1, 3, 3}, 0.0), s, t) == filled({1, 3, 3}, 0.0));
  }

  TEST_CASE("reverse_step: zero volatility and zero modulation are deterministic rollbacks") {
    const Tensor x = fixtures::random_tensor({1, 4, 4}, 9);
    const Tensor mu = fixtures::random_tensor({1, 4, 4}, 10);
    const Tensor score = fixtures::random_tensor({1, 4, 4}, 11);
    const Tensor ones = filled({1, 4, 4}, 1.0);
    const SdeSchedule calm = SdeSchedule::constant(3, 2.0, 0.0, 0.1);
    const Tensor back = reverse_step(x, mu, score, ones, calm, 2, NoiseStream(1, 1));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i] - 2.0 * (mu[i] - x[i]) * 0.1));

    const SdeSchedule s = SdeSchedule::make_default();
    const Tensor zero = filled({1, 4, 4}, 0.0);
    const Tensor a = reverse_step(x, mu, score, zero, s, 50, NoiseStream(1, 1));
    const Tensor b = reverse_step(x, mu, score, zero, s, 50, NoiseStream(2, 2));
    CHECK(a == b);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(a[i] == doctest::Approx(x[i] - s.theta[49] * (mu[i] - x[i]) * s.dt));

    CHECK_THROWS_AS(reverse_step(x, mu, score, ones, s, 0, NoiseStream(1, 1)), InvalidInput);
  }

  TEST_CASE("reverse_sample: single deterministic step, determinism, oracle recovery") {
    const Tensor x = fixtures::random_tensor({1, 4, 4}, 12);
    const Tensor mu = fixtures::random_tensor({1, 4, 4}, 13);
    const Tensor ones = filled({1, 4, 4}, 1.0);
    const SdeSchedule one = SdeSchedule::constant(1, 1.0, 0.0, 0.5);
    const ScoreProvider none = [](const Tensor& v, int) { return Tensor(v.shape()); };
    const ReverseTrace tr = reverse_sample(x, mu, none, ones, one, NoiseStream(1, 1));
    CHECK(tr.state_norms.size() == 2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tr.x0[i] == doctest::Approx(x[i] - (mu[i] - x[i]) * 0.5));

    // Stochastic recovery with the exact score on a 16x16 field.
    const SdeSchedule s = SdeSchedule::make_default();
    const Tensor x0 = fixtures::random_tensor({1, 16, 16}, 14, 0.0, 1.0);
    const Tensor m = fixtures::random_tensor({1, 16, 16}, 15, 0.0, 1.0);
    Tensor target = x0;
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = 0.3 + m[i] * (x0[i] - 0.3);
    const Tensor mu_f = filled({1, 16, 16}, 0.3);
    const NoiseStream noise(21, 22);
    const ScoreProvider oracle = [&](const Tensor& v, int t) { return oracle_score(v, target, mu_f, m, s, t); };
    const Tensor xt = make_start_state(mu_f, m, s, noise);
    const ReverseTrace a = reverse_sample(xt, mu_f, oracle, m, s, noise);
    const ReverseTrace b = reverse_sample(xt, mu_f, oracle, m, s, noise);
    CHECK(a.x0 == b.x0);
    double mse = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) mse += (a.x0[i] - target[i]) * (a.x0[i] - target[i]) / 256.0;
    CHECK(10.0 * std::log10(1.0 / mse) >= 28.0);
  }

  TEST_CASE("reverse_sample: divergence names the step") {
    const SdeSchedule s = SdeSchedule::make_default(10);
    const Tensor x = filled({1, 2, 2}, 0.5);
    const ScoreProvider bad = [](const Tensor& v, int t) {
      return t == 7 ? Tensor(v.shape(), std::nan("")) : Tensor(v.shape());
    };
    try {
      reverse_sample(x, x, bad, filled({1, 2, 2}, 1.0), s, NoiseStream(1, 1));
      FAIL("expected divergence");
    } catch (const NumericalDivergence& e) {
      CHECK(e.step() == 7);
    }
  }

  TEST_CASE("schedule validation") {
    SdeSchedule s = SdeSchedule::make_default(5);
    s.theta[2] = -1.0;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK(parse_polarity("prose") == Polarity::Prose);
    CHECK_THROWS_AS(parse_reverse_mode("sideways"), ValidationError);
  }
}
