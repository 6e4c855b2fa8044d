#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "projflow/kinematic_metric.hpp"
#include "projflow/rng.hpp"

using namespace projflow;

static void BM_MetricBuild(benchmark::State& state) {
  const auto skeleton = bench::humanml22();
  const int frames = static_cast<int>(state.range(0));
  for (auto _ : state) {
    KinematicMetric metric(*skeleton, frames, 10.0, 1.0);
    benchmark::DoNotOptimize(metric.rinvJointBlock());
  }
}
BENCHMARK(BM_MetricBuild)->Arg(64)->Arg(196);

static void BM_MetricApply(benchmark::State& state) {
  const auto skeleton = bench::humanml22();
  const int frames = static_cast<int>(state.range(0));
  const KinematicMetric metric(*skeleton, frames, 10.0, 1.0);
  Rng rng(1);
  const Eigen::VectorXd v = rng.normalVector(metric.dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(metric.apply(v));
  }
  state.SetItemsProcessed(state.iterations() * metric.dim());
}
BENCHMARK(BM_MetricApply)->Arg(64)->Arg(196);

static void BM_MetricSolve(benchmark::State& state) {
  const auto skeleton = bench::humanml22();
  const int frames = static_cast<int>(state.range(0));
  const KinematicMetric metric(*skeleton, frames, 10.0, 1.0);
  Rng rng(2);
  const Eigen::VectorXd v = rng.normalVector(metric.dim());
  for (auto _ : state) {
    benchmark::DoNotOptimize(metric.solve(v));
  }
  state.SetItemsProcessed(state.iterations() * metric.dim());
}
BENCHMARK(BM_MetricSolve)->Arg(64)->Arg(196);
