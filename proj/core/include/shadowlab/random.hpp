#pragma once

#include <cstdint>
#include <random>

namespace shadowlab {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept {
  return mix64(mix64(seed) ^ (a * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(seed, a), b);
}

// Counter-based Gaussian source. The draw for (step, index) depends only on the key,
// so element-parallel loops reproduce the sequential result bit for bit.
class NoiseStream {
 public:
  NoiseStream() = default;
  NoiseStream(std::uint64_t seed, std::uint64_t stream) : key_(derive_seed(seed, stream)) {}

  double uniform(std::uint64_t step, std::uint64_t index) const noexcept;
  double normal(std::uint64_t step, std::uint64_t index) const noexcept;
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_ = 0;
};

// Sequential engine for sampling configuration parameters.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return Engine(derive_seed(seed, stream));
}

double uniform_in(Engine& rng, double lo, double hi);
int uniform_int(Engine& rng, int lo, int hi_inclusive);

}  // namespace shadowlab
