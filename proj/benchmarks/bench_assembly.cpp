#include "asfem/fem.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace asfem;

static void BM_AssembleStiffness(benchmark::State& state) {
  const FeSpace space(bench::square(static_cast<int>(state.range(0))), static_cast<int>(state.range(1)));
  const Coefficient k = Coefficient::identity();
  for (auto _ : state) benchmark::DoNotOptimize(assemble_stiffness(space, k));
  state.counters["dofs"] = space.num_unknowns();
}
BENCHMARK(BM_AssembleStiffness)->ArgsProduct({{4, 6}, {1, 2, 3}})->Unit(benchmark::kMillisecond);

static void BM_AssembleLoad(benchmark::State& state) {
  const FeSpace space(bench::square(static_cast<int>(state.range(0))), 1);
  const ScalarField f = [](const Point& x) { return std::sin(x.x()) * x.y(); };
  for (auto _ : state) benchmark::DoNotOptimize(assemble_load(space, f, 12));
}
BENCHMARK(BM_AssembleLoad)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);
