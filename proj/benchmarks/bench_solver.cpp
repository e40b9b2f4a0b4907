#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "affiltest/affiliation.hpp"
#include "affiltest/estimate.hpp"

namespace {

// Cell counts with independent uniform noise, so the constrained fit does
// real work instead of returning the symmetric MLE.
affiltest::CellArray violating_counts(int k, int n) {
  auto grid = affiltest::GridSpec::equispaced(k, n);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> draw(20, 80);
  std::vector<double> values(grid.num_cells());
  for (auto& v : values) v = draw(rng);
  return affiltest::CellArray(grid, affiltest::CellKind::kCounts, std::move(values));
}

void BM_MleAffiliated(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  auto counts = violating_counts(k, n);
  auto cs = affiltest::generate(k, n, affiltest::ConstraintMode::kAdjacent, true);
  for (auto _ : state) {
    auto fit = affiltest::mle_affiliated(counts, cs);
    benchmark::DoNotOptimize(fit);
  }
}
BENCHMARK(BM_MleAffiliated)->Args({2, 2})->Args({3, 2})->Args({3, 3})->Args({4, 3})
    ->Unit(benchmark::kMillisecond);

void BM_MleSymmetric(benchmark::State& state) {
  auto counts = violating_counts(4, 3);
  for (auto _ : state) benchmark::DoNotOptimize(affiltest::mle_symmetric(counts));
}
BENCHMARK(BM_MleSymmetric);

}  // namespace

BENCHMARK_MAIN();
