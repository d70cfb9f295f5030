// Serial reference vs OpenMP kernels on the same inputs.
#include <benchmark/benchmark.h>

#include "driftbench/conformal.hpp"
#include "driftbench/datagen.hpp"
#include "driftbench/forest.hpp"

namespace {

using namespace driftbench;

const TrainingSet& train_set() {
  static const TrainingSet ts = [] {
    const auto ds = generate(DriftScenario::stationary(300, 7));
    return ds.slice(0, 200);
  }();
  return ts;
}

forest::SearchSpace small_space() {
  forest::SearchSpace s;
  s.n_estimators = {20, 60};
  s.max_depth = {3, 10};
  s.n_iter = 4;
  return s;
}

void BM_ForestFitSerial(benchmark::State& state) {
  const forest::Hyperparams hp{static_cast<int>(state.range(0)), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(forest::fit_serial(train_set(), hp, 1));
}

void BM_ForestFitParallel(benchmark::State& state) {
  const forest::Hyperparams hp{static_cast<int>(state.range(0)), std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(forest::fit(train_set(), hp, 1));
}

void BM_RandomSearchSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(forest::random_search_cv_serial(train_set(), small_space(), 5, 3));
}

void BM_RandomSearchParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(forest::random_search_cv(train_set(), small_space(), 5, 3));
}

void BM_CvPlusSerial(benchmark::State& state) {
  const forest::Hyperparams hp{50, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(conformal::fit_cvplus_serial(train_set(), hp, 5, 9));
}

void BM_CvPlusParallel(benchmark::State& state) {
  const forest::Hyperparams hp{50, std::nullopt};
  for (auto _ : state) benchmark::DoNotOptimize(conformal::fit_cvplus(train_set(), hp, 5, 9));
}

}  // namespace

BENCHMARK(BM_ForestFitSerial)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestFitParallel)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomSearchSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomSearchParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CvPlusSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CvPlusParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
