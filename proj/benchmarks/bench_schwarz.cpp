#include "asfem/schwarz.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

using namespace asfem;

namespace {

struct TwoLevel {
  std::shared_ptr<const TriangleMesh> coarse_mesh, fine_mesh;
  FeSpace coarse, fine;
  SparseOperator a;

  explicit TwoLevel(int level)
      : coarse_mesh(bench::square(level - 1)),
        fine_mesh(std::make_shared<const TriangleMesh>(uniform_refine(*coarse_mesh))),
        coarse(coarse_mesh, 1),
        fine(fine_mesh, 1),
        a(assemble_stiffness(fine, Coefficient::identity())) {}
};

} // namespace

static void BM_BuildDecomposition(benchmark::State& state) {
  const TwoLevel s(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(two_level_decomposition(s.fine, s.coarse, s.fine_mesh->parents(), s.a));
}
BENCHMARK(BM_BuildDecomposition)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);

static void BM_ApplySmoother(benchmark::State& state) {
  const TwoLevel s(static_cast<int>(state.range(0)));
  const SubspaceDecomposition d = two_level_decomposition(s.fine, s.coarse, s.fine_mesh->parents(), s.a);
  const Eigen::VectorXd r = Eigen::VectorXd::Ones(d.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(d.apply_smoother(r));
  state.counters["dofs"] = d.dimension();
}
BENCHMARK(BM_ApplySmoother)->Arg(5)->Arg(7)->Unit(benchmark::kMicrosecond);

static void BM_ApplyPreconditioner(benchmark::State& state) {
  const TwoLevel s(static_cast<int>(state.range(0)));
  const SubspaceDecomposition d = two_level_decomposition(s.fine, s.coarse, s.fine_mesh->parents(), s.a);
  const Eigen::VectorXd r = Eigen::VectorXd::Ones(d.dimension());
  for (auto _ : state) benchmark::DoNotOptimize(d.apply_preconditioner(r));
}
BENCHMARK(BM_ApplyPreconditioner)->Arg(5)->Arg(7)->Unit(benchmark::kMicrosecond);

static void BM_PcgSolve(benchmark::State& state) {
  const TwoLevel s(static_cast<int>(state.range(0)));
  const SubspaceDecomposition d = two_level_decomposition(s.fine, s.coarse, s.fine_mesh->parents(), s.a);
  const Eigen::VectorXd b = assemble_load(s.fine, [](const Point&) { return 1.0; });
  int iterations = 0;
  for (auto _ : state) {
    const PcgResult r = pcg_solve(s.a, b, d, 1e-8, 1000);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.solution.data());
  }
  state.counters["iterations"] = iterations;
}
BENCHMARK(BM_PcgSolve)->Arg(5)->Arg(7)->Unit(benchmark::kMillisecond);
