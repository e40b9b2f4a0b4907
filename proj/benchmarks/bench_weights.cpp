#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "affiltest/inference.hpp"

namespace {

Eigen::MatrixXd equicorrelated(int j, double rho) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(j, j, rho);
  p.diagonal().setOnes();
  return p;
}

void BM_ChibarWeights(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  auto p = equicorrelated(j, 0.3);
  for (auto _ : state) {
    auto w = affiltest::chibar_weights(p, 20000, 42, threads);
    benchmark::DoNotOptimize(w);
  }
}
BENCHMARK(BM_ChibarWeights)->Args({2, 1})->Args({9, 1})->Args({9, 4})->Args({20, 4})
    ->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ProjectOrthant(benchmark::State& state) {
  const int j = static_cast<int>(state.range(0));
  auto p = equicorrelated(j, -0.1);
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(j, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(affiltest::project_orthant(p, z));
}
BENCHMARK(BM_ProjectOrthant)->Arg(2)->Arg(9)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
