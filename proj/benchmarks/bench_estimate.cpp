#include "asfem/adapt.hpp"
#include "asfem/estimate.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

using namespace asfem;

namespace {

struct Solved {
  ProblemSpec problem = builtin_problem("unit_square_manufactured");
  FeFunction u;

  explicit Solved(int level) : u(solve_problem(problem, bench::square(level), 1)) {}
};

} // namespace

static void BM_ExplicitEstimator(benchmark::State& state) {
  const Solved s(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const ResidualData data = residual_data(s.u, s.problem.k, s.problem.f, 12);
    benchmark::DoNotOptimize(explicit_estimator(s.u.space().mesh(), data));
  }
}
BENCHMARK(BM_ExplicitEstimator)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_BubbleEstimator(benchmark::State& state) {
  const Solved s(static_cast<int>(state.range(0)));
  EstimatorOptions o;
  o.enriched = false;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_all(s.u, s.problem.k, s.problem.f, o));
}
BENCHMARK(BM_BubbleEstimator)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_SmootherEstimator(benchmark::State& state) {
  const Solved s(static_cast<int>(state.range(0)));
  EstimatorOptions o;
  o.bubbles = false;
  o.q = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_all(s.u, s.problem.k, s.problem.f, o));
}
BENCHMARK(BM_SmootherEstimator)->ArgsProduct({{4, 6}, {1, 2}})->Unit(benchmark::kMillisecond);
