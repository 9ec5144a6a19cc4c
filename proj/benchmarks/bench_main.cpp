#include <benchmark/benchmark.h>

#include <random>

#include "shadowlab/image.hpp"
#include "shadowlab/metrics.hpp"
#include "shadowlab/model.hpp"
#include "shadowlab/sde.hpp"
#include "shadowlab/ssgm.hpp"

using namespace shadowlab;

namespace {

Image noise_image(int n, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(n, n, c);
  for (float& v : img.samples()) v = u(rng);
  return img;
}

Tensor noise_tensor(std::vector<int> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

void BM_Dilate(benchmark::State& state) {
  const Image img = noise_image(static_cast<int>(state.range(0)), 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dilate(img, 4));
}
BENCHMARK(BM_Dilate)->Arg(128)->Arg(512);

void BM_Median(benchmark::State& state) {
  const Image img = noise_image(static_cast<int>(state.range(0)), 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(median_filter(img, 3));
}
BENCHMARK(BM_Median)->Arg(128)->Arg(512);

void BM_SoftMask(benchmark::State& state) {
  const Image img = noise_image(static_cast<int>(state.range(0)), 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(generate_soft_mask(img, SsgmConfig{}));
}
BENCHMARK(BM_SoftMask)->Arg(128)->Arg(512);

void BM_Ssim(benchmark::State& state) {
  const Image a = noise_image(static_cast<int>(state.range(0)), 3, 4);
  const Image b = noise_image(static_cast<int>(state.range(0)), 3, 5);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(512);

void BM_DenoiserForward(benchmark::State& state) {
  ModelConfig cfg;
  const Denoiser d(cfg);
  const int n = static_cast<int>(state.range(0));
  const Tensor x = noise_tensor({cfg.latent_channels, n, n}, 6);
  const Tensor c = noise_tensor({cfg.latent_channels, n, n}, 7);
  const Tensor m({1, n, n}, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(d.predict_noise(x, c, m, 50));
}
BENCHMARK(BM_DenoiserForward)->Arg(8)->Arg(32);

void BM_ForwardStep(benchmark::State& state) {
  const SdeSchedule sched = SdeSchedule::make_default();
  const Tensor x = noise_tensor({32, 64, 64}, 8), mu = noise_tensor({32, 64, 64}, 9);
  const Tensor mod({32, 64, 64}, 0.7);
  const NoiseStream noise(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_step(x, mu, mod, sched, 10, noise));
}
BENCHMARK(BM_ForwardStep);

void BM_ReverseStep(benchmark::State& state) {
  const SdeSchedule sched = SdeSchedule::make_default();
  const Tensor x = noise_tensor({32, 64, 64}, 10), mu = noise_tensor({32, 64, 64}, 11);
  const Tensor score = noise_tensor({32, 64, 64}, 12);
  const Tensor mod({32, 64, 64}, 0.7);
  const NoiseStream noise(1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(reverse_step(x, mu, score, mod, sched, 10, noise));
}
BENCHMARK(BM_ReverseStep);

}  // namespace
BENCHMARK_MAIN();
