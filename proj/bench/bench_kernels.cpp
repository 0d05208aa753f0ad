// Serial reference vs OpenMP vs FFT for the Toeplitz kernels behind free
// entropy and the conjugate variable, plus the end-to-end free operations.
// Thread count follows ENTROFLOW_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "entroflow/free.hpp"
#include "entroflow/kernels.hpp"

using namespace entroflow;

namespace {

std::vector<double> random_vector(std::size_t n) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void BM_ToeplitzForm(benchmark::State& state, kernels::Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = kernels::log_cell_weights(n);
  const auto p = random_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::toeplitz_form(w, p, exec));
  state.SetComplexityN(state.range(0));
}

void BM_ToeplitzProduct(benchmark::State& state, kernels::Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = random_vector(2 * n - 1);
  const auto x = random_vector(n);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::toeplitz_general(k, x, exec));
}

void BM_FreePower(benchmark::State& state) {
  const Law u(realize(LawSpec::uniform(-1.7320508075688772, 1.7320508075688772)));
  for (auto _ : state) benchmark::DoNotOptimize(freeprob::free_power(u, static_cast<int>(state.range(0))));
}

void BM_DensityFromCauchy(benchmark::State& state) {
  const freeprob::CauchyEvaluator g(realize(LawSpec::semicircle(0.0, 1.0)));
  for (auto _ : state) benchmark::DoNotOptimize(freeprob::density_from_cauchy(g, Grid::standard(), 1e-3));
}

}  // namespace

BENCHMARK_CAPTURE(BM_ToeplitzForm, serial, kernels::Exec::kSerial)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK_CAPTURE(BM_ToeplitzForm, parallel, kernels::Exec::kParallel)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK_CAPTURE(BM_ToeplitzForm, fft, kernels::Exec::kFft)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK_CAPTURE(BM_ToeplitzProduct, serial, kernels::Exec::kSerial)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK_CAPTURE(BM_ToeplitzProduct, parallel, kernels::Exec::kParallel)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK_CAPTURE(BM_ToeplitzProduct, fft, kernels::Exec::kFft)->RangeMultiplier(4)->Range(256, 4096);
BENCHMARK(BM_FreePower)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DensityFromCauchy)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
