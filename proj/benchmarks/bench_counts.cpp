#include <benchmark/benchmark.h>

#include "affiltest/grid.hpp"
#include "affiltest/simulate.hpp"

namespace {

void BM_CountCells(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const int n = static_cast<int>(state.range(1));
  auto dgp = affiltest::uniform_dgp(k, n);
  auto tuples = affiltest::sample(dgp, 10000, 11);
  for (auto _ : state) {
    auto counts = affiltest::count_cells(tuples, dgp.masses.grid());
    benchmark::DoNotOptimize(counts);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(tuples.size()));
}
BENCHMARK(BM_CountCells)->Args({2, 2})->Args({3, 3})->Args({5, 4});

}  // namespace

BENCHMARK_MAIN();
