#include "asfem/adapt.hpp"
#include "asfem/error.hpp"

#include "meshes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace asfem;
using asfem::testing::shared;

TEST(Dorfler, Examples) {
  const std::vector<double> a = {4, 3, 2, 1};
  EXPECT_EQ(dorfler_mark(a, 0.6), (std::vector<int>{0, 1}));
  const std::vector<double> shuffled = {2, 4, 1, 3};
  EXPECT_EQ(dorfler_mark(shuffled, 0.6), (std::vector<int>{1, 3}));
  const std::vector<double> with_zero = {0, 5, 0, 1};
  EXPECT_EQ(dorfler_mark(with_zero, 1.0), (std::vector<int>{1, 3}));
  const std::vector<double> equal(8, 1.0);
  EXPECT_EQ(dorfler_mark(equal, 0.5), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Dorfler, Errors) {
  const std::vector<double> zeros(5, 0.0);
  EXPECT_THROW(dorfler_mark(zeros, 0.5), InvalidArgument);
  const std::vector<double> negative = {1, -1};
  EXPECT_THROW(dorfler_mark(negative, 0.5), InvalidArgument);
  const std::vector<double> ok = {1, 2};
  EXPECT_THROW(dorfler_mark(ok, 0.0), InvalidArgument);
  EXPECT_THROW(dorfler_mark(ok, 1.5), InvalidArgument);
}

TEST(Dorfler, Minimality) {
  std::vector<double> v(50);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::pow(std::sin(3.7 * static_cast<double>(i) + 0.3), 2);
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (double theta : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    const std::vector<int> m = dorfler_mark(v, theta);
    double sum = 0.0, smallest = 1e300;
    for (int i : m) {
      sum += v[static_cast<std::size_t>(i)];
      smallest = std::min(smallest, v[static_cast<std::size_t>(i)]);
    }
    EXPECT_GE(sum, theta * total * (1 - 1e-15));
    EXPECT_LT(sum - smallest, theta * total);
    // every unmarked indicator is no larger than every marked one
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!std::binary_search(m.begin(), m.end(), static_cast<int>(i))) EXPECT_LE(v[i], smallest);
  }
}

TEST(Dorfler, VerticesMarkWholePatches) {
  const TriangleMesh mesh = asfem::testing::unit_square_level(2);
  std::vector<double> eta(static_cast<std::size_t>(mesh.num_vertices()), 0.0);
  eta[12] = 1.0;
  const std::vector<int> marked = dorfler_mark_vertices(mesh, eta, 0.5);
  std::vector<int> patch = vertex_patch(mesh, 12).triangles;
  std::sort(patch.begin(), patch.end());
  EXPECT_EQ(marked, patch);
  EXPECT_THROW(dorfler_mark_vertices(mesh, std::vector<double>(3, 1.0), 0.5), InvalidArgument);
}

TEST(Problems, StrongFormConsistent) {
  for (const std::string& name : builtin_problem_names()) {
    const ProblemSpec p = builtin_problem(name);
    EXPECT_LT(check_problem(p), 1e-5) << name;
  }
  ProblemSpec wrong = builtin_problem("unit_square_manufactured");
  wrong.f = [](const Point&) { return 1.0; };
  EXPECT_GT(check_problem(wrong), 0.1);
  EXPECT_THROW(builtin_problem("nope"), InvalidArgument);
}

TEST(ReferenceError, ZeroWhenExact) {
  const ProblemSpec zero = builtin_problem("zero_source");
  auto mesh = shared(builtin_mesh(zero.domain, 2));
  const FeFunction u = solve_problem(zero, mesh, 1);
  EXPECT_EQ(reference_energy_error(zero, u, ReferenceMode::manufactured), 0.0);
  EXPECT_EQ(reference_energy_error(zero, u, ReferenceMode::deep_refine), 0.0);

  const ProblemSpec lshape = builtin_problem("l_shape_constant");
  auto lmesh = shared(builtin_mesh(lshape.domain, 2));
  const FeFunction ul = solve_problem(lshape, lmesh, 1);
  EXPECT_LT(reference_energy_error(lshape, ul, ReferenceMode::deep_refine, 0), 1e-7);
  EXPECT_GT(reference_energy_error(lshape, ul, ReferenceMode::deep_refine, 1), 0.0);
  EXPECT_THROW(reference_energy_error(lshape, ul, ReferenceMode::manufactured), InvalidArgument);
}

TEST(ReferenceError, ManufacturedRate) {
  const ProblemSpec p = builtin_problem("unit_square_manufactured");
  TriangleMesh mesh = builtin_mesh(p.domain, 1);
  std::vector<double> ndof, err;
  for (int level = 0; level < 7; ++level) {
    auto m = shared(mesh);
    const FeFunction u = solve_problem(p, m, 1);
    if (level >= 2) {
      ndof.push_back(u.space().num_unknowns());
      err.push_back(reference_energy_error(p, u, ReferenceMode::manufactured));
    }
    mesh = uniform_refine(mesh);
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_NEAR(err[i - 1] / err[i], 2.0, 0.2);
  EXPECT_NEAR(fit_rate(ndof, err).slope, -0.5, 0.05);
  // deep refinement agrees with the closed form up to the reference error
  auto m = shared(builtin_mesh(p.domain, 1));
  TriangleMesh fine = uniform_refine(uniform_refine(*m));
  const FeFunction u = solve_problem(p, shared(fine), 1);
  const double exact = reference_energy_error(p, u, ReferenceMode::manufactured);
  const double deep = reference_energy_error(p, u, ReferenceMode::deep_refine, 3);
  EXPECT_NEAR(deep, exact, 0.1 * exact);
}

TEST(FitRate, Synthetic) {
  std::vector<double> n = {10, 40, 160, 640, 2560};
  std::vector<double> v, c(n.size(), 3.0);
  for (double x : n) v.push_back(7.0 * std::pow(x, -0.5));
  const RateFit fit = fit_rate(n, v);
  EXPECT_NEAR(fit.slope, -0.5, 1e-12);
  ASSERT_EQ(fit.step_slopes.size(), n.size() - 1);
  for (double s : fit.step_slopes) EXPECT_NEAR(s, -0.5, 1e-12);
  EXPECT_NEAR(fit_rate(n, c).slope, 0.0, 1e-14);
  // non-positive values are skipped, leaving too few points
  std::vector<double> sparse = {1.0, 0.0, -1.0, 0.5, 0.0};
  EXPECT_THROW(fit_rate(n, sparse), InvalidArgument);
  EXPECT_THROW(fit_rate(std::span<const double>(n).first(2), std::span<const double>(v).first(2)), InvalidArgument);
}

TEST(AdaptLoop, ZeroSourceStopsAtLevelZero) {
  const AdaptTrace t = adapt_loop(builtin_problem("zero_source"), {});
  ASSERT_EQ(t.levels.size(), 1u);
  EXPECT_EQ(t.levels[0].zeta_total, 0.0);
  EXPECT_EQ(t.levels[0].eta_tilde_total, 0.0);
  EXPECT_EQ(t.levels[0].smoother_estimate, 0.0);
  EXPECT_EQ(t.levels[0].energy_error, 0.0);
  EXPECT_EQ(t.levels[0].marked_count, 0);
}

TEST(AdaptLoop, InvalidOptions) {
  const ProblemSpec p = builtin_problem("l_shape_constant");
  AdaptOptions o;
  o.theta = 0.0;
  EXPECT_THROW(adapt_loop(p, o), InvalidArgument);
  o = {};
  o.max_dof = 0; // one unknown on the initial unit square mesh
  EXPECT_THROW(adapt_loop(builtin_problem("unit_square_manufactured"), o), InvalidArgument);
  o = {};
  o.p = 3;
  EXPECT_THROW(adapt_loop(p, o), InvalidArgument);
}

TEST(AdaptLoop, TraceInvariantsAndDeterminism) {
  const ProblemSpec p = builtin_problem("l_shape_constant");
  AdaptOptions o;
  o.max_dof = 400;
  o.estimator = EstimatorKind::bubble_eta;
  const AdaptTrace a = adapt_loop(p, o);
  const AdaptTrace b = adapt_loop(p, o);
  ASSERT_GE(a.levels.size(), 3u);
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    const LevelRecord& r = a.levels[i];
    EXPECT_EQ(r.level, static_cast<int>(i));
    if (i > 0) EXPECT_GT(r.ndof, a.levels[i - 1].ndof);
    EXPECT_GE(r.energy_error, 0.0);
    EXPECT_GE(r.eta_tilde_total, 0.0);
    EXPECT_GE(r.zeta_total, 0.0);
    EXPECT_GE(r.smoother_estimate, 0.0);
    EXPECT_GE(r.osc, 0.0);
    if (i + 1 < a.levels.size()) EXPECT_GT(r.marked_count, 0);
    // nested spaces: the energy error never grows
    if (i > 0) EXPECT_LE(r.energy_error, a.levels[i - 1].energy_error * (1 + 1e-12));
  }
  EXPECT_GT(a.levels.back().ndof, o.max_dof);
  EXPECT_LE(a.levels[a.levels.size() - 2].ndof, o.max_dof);
  EXPECT_TRUE(std::isnan(a.levels[0].lambda_min));

  std::ostringstream sa, sb;
  write_trace_csv(sa, a);
  write_trace_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')),
            "level,ndof,energy_error,eta_tilde_total,zeta_total,smoother_estimate,osc,pcg_iters,lambda_min,lambda_max,"
            "marked_count");
}

TEST(AdaptLoop, LevelCapAndUniform) {
  AdaptOptions o;
  o.refinement = RefinementMode::uniform;
  o.max_levels = 3;
  const AdaptTrace t = adapt_loop(builtin_problem("unit_square_manufactured"), o);
  ASSERT_EQ(t.levels.size(), 3u);
  for (std::size_t i = 1; i < t.levels.size(); ++i) EXPECT_GT(t.levels[i].ndof, 2 * t.levels[i - 1].ndof);
  EXPECT_EQ(t.final_mesh->num_triangles(), builtin_mesh(Domain::unit_square, 2).num_triangles() * 16);
}

TEST(AdaptLoop, VerificationRecorded) {
  AdaptOptions o;
  o.max_dof = 30;
  o.verify_spectral = true;
  o.verify_identity = true;
  const AdaptTrace t = adapt_loop(builtin_problem("unit_square_manufactured"), o);
  ASSERT_EQ(t.verification.size(), t.levels.size());
  for (std::size_t i = 0; i < t.levels.size(); ++i) {
    const VerificationReport& v = t.verification[i];
    EXPECT_EQ(v.level, static_cast<int>(i));
    EXPECT_GT(v.lambda_min, 0.0);
    EXPECT_GE(v.lambda_max, v.lambda_min);
    EXPECT_EQ(t.levels[i].lambda_min, v.lambda_min);
    if (v.ndof <= kIdentityCap) EXPECT_LE(v.identity_err, 1e-8);
    const double ratio = t.levels[i].smoother_estimate / std::pow(t.levels[i].energy_error, 2);
    EXPECT_GE(ratio, v.lambda_min * (1 - 1e-8));
    EXPECT_LE(ratio, v.lambda_max * (1 + 1e-8));
  }
}
