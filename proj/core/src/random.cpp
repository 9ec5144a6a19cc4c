#include "shadowlab/random.hpp"

#include <cmath>
#include <numbers>

namespace shadowlab {

double NoiseStream::uniform(std::uint64_t step, std::uint64_t index) const noexcept {
  const std::uint64_t bits = mix64(derive_seed(key_, step) ^ mix64(index));
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double NoiseStream::normal(std::uint64_t step, std::uint64_t index) const noexcept {
  // Box-Muller over two decorrelated counters; only the cosine branch is used.
  const double u1 = uniform(step, 2 * index);
  const double u2 = uniform(step, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double uniform_in(Engine& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

int uniform_int(Engine& rng, int lo, int hi_inclusive) {
  const auto span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

}  // namespace shadowlab
