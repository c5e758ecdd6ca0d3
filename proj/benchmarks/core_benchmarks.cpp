#include <benchmark/benchmark.h>

#include "kiv/estimators.hpp"
#include "kiv/rng.hpp"

namespace {

kiv::Matrix random_points(Eigen::Index n, Eigen::Index d, kiv::Rng& rng) {
  kiv::Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.normal();
  }
  return m;
}

void BM_GramMatrix(benchmark::State& state) {
  kiv::Rng rng(1);
  const auto n = state.range(0);
  const kiv::Matrix pts = random_points(n, 3, rng);
  const kiv::KernelSpec spec = kiv::GaussianKernel{{1.0, 1.0, 1.0}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kiv::gram_matrix(spec, pts, pts));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_GramMatrix)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_RegularizedSolve(benchmark::State& state) {
  kiv::Rng rng(2);
  const auto n = state.range(0);
  const kiv::Matrix a = random_points(n, n, rng);
  kiv::Matrix spd = a * a.transpose();
  spd.diagonal().array() += 1.0;
  const kiv::Matrix b = random_points(n, 8, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kiv::regularized_solve(spd, 0.1, b));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_RegularizedSolve)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_FitKiv(benchmark::State& state) {
  kiv::Rng rng(3);
  const auto n = state.range(0);
  kiv::SplitDataset data;
  data.x1 = random_points(n, 1, rng);
  data.z1 = random_points(n, 1, rng);
  data.y1 = random_points(n, 1, rng).col(0);
  data.x2 = random_points(n, 1, rng);
  data.z2 = random_points(n, 1, rng);
  data.y2 = random_points(n, 1, rng).col(0);
  const kiv::KernelSpec kernel = kiv::GaussianKernel{{1.0}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kiv::fit_kiv(data, kernel, kernel, 0.01, 0.01));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_FitKiv)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_TuneTwoLevel(benchmark::State& state) {
  kiv::Rng rng(4);
  const auto n = state.range(0);
  kiv::SplitDataset data;
  data.x1 = random_points(n, 1, rng);
  data.z1 = random_points(n, 1, rng);
  data.y1 = random_points(n, 1, rng).col(0);
  data.x2 = random_points(n, 1, rng);
  data.z2 = random_points(n, 1, rng);
  data.y2 = random_points(n, 1, rng).col(0);
  const kiv::KernelSpec kernel = kiv::GaussianKernel{{1.0}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kiv::tune_two_level(data, kernel, kernel));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_TuneTwoLevel)->RangeMultiplier(2)->Range(64, 512)->Complexity();

}  // namespace

BENCHMARK_MAIN();
