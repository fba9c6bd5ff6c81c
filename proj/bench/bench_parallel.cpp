// Serial reference vs OpenMP paths. Results are identical by construction;
// only wall time differs. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "potmde/sim.hpp"
#include "potmde/threshold.hpp"

using namespace potmde;

namespace {

Execution mode(const benchmark::State& st) { return st.range(0) ? Execution::Parallel : Execution::Serial; }

void label(benchmark::State& st) {
  st.SetLabel(st.range(0) ? "parallel x" + std::to_string(omp_get_max_threads()) : "serial");
}

void BM_mc_compare(benchmark::State& st) {
  SimOptions o;
  o.execution = mode(st);
  for (auto _ : st) benchmark::DoNotOptimize(mc_compare({0.1, 0.3, 0.5}, {50, 100}, 100, 1, o));
  label(st);
}

void BM_coverage(benchmark::State& st) {
  SimOptions o;
  o.execution = mode(st);
  for (auto _ : st) benchmark::DoNotOptimize(coverage_study(GpdParams(0.2, 1.0), 500, {1.0, 3.0}, 0.95, 64, 2, o));
  label(st);
}

void BM_scan(benchmark::State& st) {
  const auto x = sample(GpdParams(0.3, 1.0), 50000, 3);
  const std::vector<EventCurve> curves{curve_from_aggregator(x, EventKind::Sum)};
  std::vector<double> grid;
  for (int i = 0; i < 16; ++i) grid.push_back(0.25 * i);
  ScanOptions o;
  o.execution = mode(st);
  for (auto _ : st) benchmark::DoNotOptimize(scan(curves, 40.0, grid, o));
  label(st);
}

}  // namespace

BENCHMARK(BM_mc_compare)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_coverage)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_scan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
