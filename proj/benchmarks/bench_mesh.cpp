#include "asfem/mesh.hpp"

#include "bench_common.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace asfem;

static void BM_UniformRefine(benchmark::State& state) {
  const auto mesh = bench::square(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uniform_refine(*mesh));
  state.counters["triangles"] = mesh->num_triangles();
}
BENCHMARK(BM_UniformRefine)->Arg(4)->Arg(7)->Unit(benchmark::kMillisecond);

// marks the triangles touching the corner (0, 0)
static void BM_LocalBisection(benchmark::State& state) {
  const auto mesh = bench::square(static_cast<int>(state.range(0)));
  std::vector<int> marked;
  for (int t = 0; t < mesh->num_triangles(); ++t) {
    const Point c = mesh->centroid(t);
    if (c.x() + c.y() < 0.25) marked.push_back(t);
  }
  for (auto _ : state) benchmark::DoNotOptimize(refine_bisection(*mesh, marked));
  state.counters["marked"] = static_cast<double>(marked.size());
}
BENCHMARK(BM_LocalBisection)->Arg(4)->Arg(7)->Unit(benchmark::kMillisecond);

static void BM_MeshStats(benchmark::State& state) {
  const auto mesh = bench::square(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mesh_stats(*mesh));
}
BENCHMARK(BM_MeshStats)->Arg(6)->Unit(benchmark::kMillisecond);
