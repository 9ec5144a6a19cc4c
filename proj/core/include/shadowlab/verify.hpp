#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shadowlab/sde.hpp"

namespace shadowlab {

struct SdeVerifyConfig {
  std::uint64_t seed = 0;
  int paths = 10000;          // Monte-Carlo paths for the marginal suite
  int recovery_seeds = 16;    // independent fields for the oracle-recovery suite
  int field_size = 32;
  int steps = 100;
  double noise_level = 50.0 / 255.0;
  double total_reversion = 4.0;
  ReverseMode reverse_mode = ReverseMode::Stochastic;

  void validate() const;
};

struct VerifyCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool passed = false;
};

struct SdeVerifyReport {
  std::vector<VerifyCheck> checks;

  bool passed() const noexcept;
  // One line per check: name, value, bound, PASS/FAIL.
  std::string to_text() const;
};

// Marginal suite: constant theta = 1, sigma = 0.5, dt = 1/steps, Euler-Maruyama paths from
// x0 = 1 toward mu = 0; |z| of the empirical mean and variance at t = 0.25, 0.5, 1.0.
// Recovery suite: soft-disc shadows on random fields, reverse_sample driven by the oracle
// score from make_start_state; mean PSNR (peak 1) and the worst error on modulation-zero
// pixels.
SdeVerifyReport verify_sde(const SdeVerifyConfig& cfg);

struct RecoveryFixture {
  Tensor x0;
  Tensor mu;
  Tensor mod;
};

// x0 equals mu wherever the disc mask is zero; the mask doubles as the prose-polarity
// modulation.
RecoveryFixture make_recovery_fixture(int size, std::uint64_t seed);

}  // namespace shadowlab
