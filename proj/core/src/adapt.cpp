#include "asfem/adapt.hpp"

#include "asfem/error.hpp"
#include "asfem/lagrange.hpp"
#include "asfem/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

namespace asfem {

// ----------------------------------------------------------------- problems

ProblemSpec builtin_problem(std::string_view name) {
  using std::numbers::pi;
  ProblemSpec spec;
  spec.name = std::string(name);
  if (name == "unit_square_manufactured") {
    spec.domain = Domain::unit_square;
    spec.n0 = 2;
    spec.f = [](const Point& x) { return 2.0 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y()); };
    spec.exact = [](const Point& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
    spec.exact_gradient = [](const Point& x) {
      return Eigen::Vector2d(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()),
                             pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
    };
  } else if (name == "l_shape_constant") {
    spec.domain = Domain::l_shape;
    spec.n0 = 1;
    spec.f = [](const Point&) { return 1.0; };
  } else if (name == "checkerboard_constant") {
    spec.domain = Domain::checkerboard_square;
    spec.n0 = 1;
    const Eigen::Matrix2d one = Eigen::Matrix2d::Identity();
    spec.k = Coefficient::piecewise({one, 10.0 * one, 10.0 * one, one});
    spec.f = [](const Point&) { return 1.0; };
  } else if (name == "zero_source") {
    spec.domain = Domain::unit_square;
    spec.n0 = 2;
    spec.f = [](const Point&) { return 0.0; };
    spec.exact = [](const Point&) { return 0.0; };
    spec.exact_gradient = [](const Point&) { return Eigen::Vector2d::Zero().eval(); };
  } else {
    throw InvalidArgument(fmt::format("unknown problem '{}'", name));
  }
  return spec;
}

std::vector<std::string> builtin_problem_names() {
  return {"unit_square_manufactured", "l_shape_constant", "checkerboard_constant", "zero_source"};
}

double check_problem(const ProblemSpec& problem) {
  if (!problem.has_exact()) return 0.0;
  const auto probe = builtin_mesh(problem.domain, 2);
  const double h = 1e-5;
  double worst = 0.0;
  for (int t = 0; t < probe.num_triangles(); ++t) {
    const Point x = probe.centroid(t);
    const Eigen::Matrix2d& k = problem.k.on_region(probe.region(t));
    double div = 0.0;
    for (int d = 0; d < 2; ++d) {
      Point xp = x;
      Point xm = x;
      xp[d] += h;
      xm[d] -= h;
      div += ((k * problem.exact_gradient(xp))[d] - (k * problem.exact_gradient(xm))[d]) / (2.0 * h);
    }
    const double f = problem.f(x);
    worst = std::max(worst, std::abs(-div - f) / std::max(1.0, std::abs(f)));
  }
  return worst;
}

// ------------------------------------------------------------------ marking

std::vector<int> dorfler_mark(std::span<const double> indicators, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidArgument(fmt::format("dorfler_mark: theta {} not in (0, 1]", theta));
  for (double v : indicators)
    if (!(v >= 0.0)) throw InvalidArgument("dorfler_mark: indicators must be nonnegative");
  std::vector<int> order(indicators.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return indicators[static_cast<std::size_t>(a)] > indicators[static_cast<std::size_t>(b)];
  });
  double total = 0.0;
  for (int i : order) total += indicators[static_cast<std::size_t>(i)];
  if (total == 0.0) throw InvalidArgument("dorfler_mark: all indicators are zero");
  std::vector<int> marked;
  double sum = 0.0;
  for (int i : order) {
    if (sum >= theta * total) break;
    const double v = indicators[static_cast<std::size_t>(i)];
    if (v == 0.0) break;
    marked.push_back(i);
    sum += v;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

std::vector<int> dorfler_mark_vertices(const TriangleMesh& mesh, std::span<const double> indicators, double theta) {
  if (static_cast<int>(indicators.size()) != mesh.num_vertices())
    throw InvalidArgument("dorfler_mark_vertices: one indicator per vertex expected");
  std::vector<char> flag(static_cast<std::size_t>(mesh.num_triangles()), 0);
  for (int k : dorfler_mark(indicators, theta))
    for (int t : mesh.vertex_triangles(k)) flag[static_cast<std::size_t>(t)] = 1;
  std::vector<int> marked;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (flag[static_cast<std::size_t>(t)]) marked.push_back(t);
  return marked;
}

// -------------------------------------------------------------------- enums

EstimatorKind parse_estimator(std::string_view name) {
  if (name == "explicit_zeta") return EstimatorKind::explicit_zeta;
  if (name == "bubble_eta") return EstimatorKind::bubble_eta;
  if (name == "smoother") return EstimatorKind::smoother;
  throw InvalidArgument(fmt::format("unknown estimator '{}'", name));
}

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
  case EstimatorKind::explicit_zeta: return "explicit_zeta";
  case EstimatorKind::bubble_eta: return "bubble_eta";
  case EstimatorKind::smoother: return "smoother";
  }
  return "?";
}

RefinementMode parse_refinement(std::string_view name) {
  if (name == "adaptive") return RefinementMode::adaptive;
  if (name == "uniform") return RefinementMode::uniform;
  throw InvalidArgument(fmt::format("unknown refinement '{}'", name));
}

std::string_view to_string(RefinementMode mode) { return mode == RefinementMode::uniform ? "uniform" : "adaptive"; }

SolverKind parse_solver(std::string_view name) {
  if (name == "direct_dense") return SolverKind::direct_dense;
  if (name == "sparse_direct") return SolverKind::sparse_direct;
  if (name == "pcg") return SolverKind::pcg;
  throw InvalidArgument(fmt::format("unknown solver '{}'", name));
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
  case SolverKind::direct_dense: return "direct_dense";
  case SolverKind::sparse_direct: return "sparse_direct";
  case SolverKind::pcg: return "pcg";
  }
  return "?";
}

// ------------------------------------------------------------------- errors

FeFunction solve_problem(const ProblemSpec& problem, std::shared_ptr<const TriangleMesh> mesh, int p,
                         int quadrature_order, const SolveOptions& solve) {
  auto space = std::make_shared<const FeSpace>(std::move(mesh), p);
  const SparseOperator a = assemble_stiffness(*space, problem.k);
  const Eigen::VectorXd b = assemble_load(*space, problem.f, quadrature_order);
  return galerkin_solve(space, a, b, solve);
}

namespace {

double manufactured_error(const ProblemSpec& problem, const FeFunction& u_h) {
  if (!problem.has_exact()) throw InvalidArgument("reference_energy_error: problem has no exact solution");
  const FeSpace& space = u_h.space();
  const TriangleMesh& mesh = space.mesh();
  const int order = std::max(2 * space.degree() + 4, 12);
  const TriangleRule& rule = triangle_rule(order);
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space.degree());
  const auto& tab = basis.tabulate(order);
  double sum = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh, t);
    const Eigen::Matrix2d& k = problem.k.on_region(mesh.region(t));
    const auto dofs = space.element_dofs(t);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector2d ref = Eigen::Vector2d::Zero();
      for (int j = 0; j < basis.size(); ++j) ref += u_h.values()[dofs[static_cast<std::size_t>(j)]] * tab.gradients[q].row(j).transpose();
      const Eigen::Vector2d diff = problem.exact_gradient(map.to_physical(rule.points[q])) - map.inverse_transpose * ref;
      sum += rule.weights[q] * std::abs(map.det) * diff.dot(k * diff);
    }
  }
  return std::sqrt(sum);
}

double discrete_energy_squared(const ProblemSpec& problem, const FeFunction& u) {
  const SparseOperator a = assemble_stiffness(u.space(), problem.k);
  const Eigen::VectorXd x = u.space().to_unknowns(u.values());
  return x.dot(a * x);
}

std::shared_ptr<const TriangleMesh> refined_copy(const TriangleMesh& mesh, int times) {
  auto out = std::make_shared<const TriangleMesh>(mesh);
  for (int i = 0; i < times; ++i) out = std::make_shared<const TriangleMesh>(uniform_refine(*out));
  return out;
}

} // namespace

double reference_energy_error(const ProblemSpec& problem, const FeFunction& u_h, ReferenceMode mode,
                              int extra_refinements, int quadrature_order) {
  if (mode == ReferenceMode::manufactured) return manufactured_error(problem, u_h);
  if (extra_refinements < 0) throw InvalidArgument("reference_energy_error: negative refinement count");
  const FeFunction u_ref = solve_problem(problem, refined_copy(u_h.space().mesh(), extra_refinements),
                                         u_h.space().degree(), quadrature_order);
  const double gap = discrete_energy_squared(problem, u_ref) - discrete_energy_squared(problem, u_h);
  return std::sqrt(std::max(0.0, gap));
}

// -------------------------------------------------------------------- rates

RateFit fit_rate(std::span<const double> ndof, std::span<const double> values) {
  if (ndof.size() != values.size()) throw InvalidArgument("fit_rate: columns differ in length");
  std::vector<double> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < ndof.size(); ++i) {
    if (ndof[i] > 0.0 && values[i] > 0.0 && std::isfinite(values[i])) {
      x.push_back(std::log(ndof[i]));
      y.push_back(std::log(values[i]));
    }
  }
  if (x.size() < 3) throw InvalidArgument("fit_rate: need at least 3 levels with positive values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_rate: ndof does not vary");
  RateFit fit;
  fit.slope = sxy / sxx;
  for (std::size_t i = 1; i < x.size(); ++i) fit.step_slopes.push_back((y[i] - y[i - 1]) / (x[i] - x[i - 1]));
  return fit;
}

namespace {

double column_value(const LevelRecord& r, std::string_view column) {
  if (column == "energy_error") return r.energy_error;
  if (column == "eta_tilde_total") return r.eta_tilde_total;
  if (column == "zeta_total") return r.zeta_total;
  if (column == "smoother_estimate") return r.smoother_estimate;
  if (column == "osc") return r.osc;
  if (column == "pcg_iters") return r.pcg_iters;
  if (column == "lambda_min") return r.lambda_min;
  if (column == "lambda_max") return r.lambda_max;
  if (column == "marked_count") return r.marked_count;
  if (column == "eta_enriched_total") return r.eta_enriched_total;
  throw InvalidArgument(fmt::format("fit_rate: unknown column '{}'", column));
}

} // namespace

RateFit fit_rate(const AdaptTrace& trace, std::string_view column) {
  std::vector<double> ndof;
  std::vector<double> values;
  for (const auto& r : trace.levels) {
    ndof.push_back(r.ndof);
    values.push_back(column_value(r, column));
  }
  return fit_rate(ndof, values);
}

// --------------------------------------------------------------------- loop

AdaptTrace adapt_loop(const ProblemSpec& problem, const AdaptOptions& options) {
  if (!(options.theta > 0.0 && options.theta <= 1.0))
    throw InvalidArgument(fmt::format("theta {} not in (0, 1]", options.theta));
  if (options.p < 1 || options.p > 2) throw InvalidArgument(fmt::format("p {} not in {{1, 2}}", options.p));
  if (options.q < 1 || options.q > 4) throw InvalidArgument(fmt::format("q {} not in [1, 4]", options.q));
  if (options.max_levels < 1) throw InvalidArgument("max_levels must be >= 1");

  ErrorMode error_mode = options.error;
  if (error_mode == ErrorMode::automatic) error_mode = problem.has_exact() ? ErrorMode::manufactured : ErrorMode::deep_refine;

  AdaptTrace trace;
  trace.problem = problem.name;
  trace.theta = options.theta;

  std::shared_ptr<const TriangleMesh> mesh =
      options.initial_mesh ? options.initial_mesh
                           : std::make_shared<const TriangleMesh>(builtin_mesh(problem.domain, problem.n0));
  mesh->validate();
  std::shared_ptr<const FeSpace> previous;
  std::vector<double> discrete_energy;

  for (int level = 0;; ++level) {
    auto space = std::make_shared<const FeSpace>(mesh, options.p);
    if (level == 0 && space->num_unknowns() > options.max_dof)
      throw InvalidArgument(fmt::format("max_dof {} is below the initial dof count {}", options.max_dof,
                                        space->num_unknowns()));
    const SparseOperator a = assemble_stiffness(*space, problem.k);
    const Eigen::VectorXd b = assemble_load(*space, problem.f, options.quadrature_order);

    LevelRecord rec;
    rec.level = level;
    rec.ndof = space->num_unknowns();
    Eigen::VectorXd x;
    if (options.solver == SolverKind::pcg && rec.ndof > 0) {
      const SubspaceDecomposition d =
          previous ? two_level_decomposition(*space, *previous, mesh->parents(), a)
                   : one_level_decomposition(*space, a);
      const PcgResult res = pcg_solve(a, b, d, options.rel_tol, 20000);
      x = res.solution;
      rec.pcg_iters = res.iterations;
    } else {
      x = rec.ndof > 0 ? solve_spd(a, b, {options.solver, options.rel_tol}) : Eigen::VectorXd();
    }
    const FeFunction u_h(space, space->from_unknowns(x));
    discrete_energy.push_back(x.dot(a * x));
    rec.discrete_energy = discrete_energy.back();

    EstimatorOptions eopt;
    eopt.q = options.q;
    eopt.quadrature_order = options.quadrature_order;
    EstimatorRun est = estimate_all(u_h, problem.k, problem.f, eopt);
    const EstimatorReport& report = est.report;
    rec.eta_tilde_total = report.eta_tilde_total;
    rec.eta_enriched_total = report.eta_enriched_total;
    rec.zeta_total = report.zeta_total;
    rec.smoother_estimate = report.smoother_estimate;
    rec.osc = report.osc;

    if (error_mode == ErrorMode::manufactured) rec.energy_error = manufactured_error(problem, u_h);

    if ((options.verify_spectral || options.verify_identity) && est.decomposition &&
        est.decomposition->dimension() > 0) {
      VerificationReport vr;
      if (options.verify_spectral) vr = spectral_bounds(est.enriched->stiffness, *est.decomposition);
      vr.level = level;
      vr.ndof = est.decomposition->dimension();
      if (options.verify_identity && vr.ndof <= kIdentityCap) {
        std::mt19937 gen(20240u + static_cast<unsigned>(level));
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<Eigen::VectorXd> trials(20, Eigen::VectorXd(vr.ndof));
        for (auto& v : trials)
          for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(gen);
        vr.identity_err = verify_decomposition_identity(*est.decomposition, trials);
      }
      rec.lambda_min = vr.lambda_min;
      rec.lambda_max = vr.lambda_max;
      trace.verification.push_back(vr);
    }

    const bool last = rec.ndof > options.max_dof || level + 1 >= options.max_levels;
    std::vector<int> marked;
    if (options.refinement == RefinementMode::uniform) {
      marked.resize(static_cast<std::size_t>(mesh->num_triangles()));
      std::iota(marked.begin(), marked.end(), 0);
    } else {
      std::vector<double> squared;
      auto squares = [&squared](const std::vector<double>& v) {
        squared.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) squared[i] = v[i] * v[i];
      };
      bool by_vertex = true;
      switch (options.estimator) {
      case EstimatorKind::explicit_zeta:
        squares(report.zeta_element);
        by_vertex = false;
        break;
      case EstimatorKind::bubble_eta: squares(report.eta_tilde); break;
      case EstimatorKind::smoother: squares(report.eta_enriched); break;
      }
      const double total = std::accumulate(squared.begin(), squared.end(), 0.0);
      if (total > 0.0)
        marked = by_vertex ? dorfler_mark_vertices(*mesh, squared, options.theta) : dorfler_mark(squared, options.theta);
    }
    rec.marked_count = last ? 0 : static_cast<int>(marked.size());
    trace.levels.push_back(rec);
    trace.final_report = report;

    if (last || marked.empty()) break;
    previous = space;
    if (options.refinement == RefinementMode::uniform)
      mesh = std::make_shared<const TriangleMesh>(uniform_refine(*mesh));
    else
      mesh = std::make_shared<const TriangleMesh>(refine_bisection(*mesh, marked));
    mesh->validate();
  }
  trace.final_mesh = mesh;

  if (error_mode == ErrorMode::deep_refine) {
    const FeFunction u_ref = solve_problem(problem, refined_copy(*mesh, 2), options.p, options.quadrature_order);
    const double reference = discrete_energy_squared(problem, u_ref);
    trace.reference_energy = reference;
    for (std::size_t i = 0; i < trace.levels.size(); ++i)
      trace.levels[i].energy_error = std::sqrt(std::max(0.0, reference - discrete_energy[i]));
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const AdaptTrace& trace) {
  out << "level,ndof,energy_error,eta_tilde_total,zeta_total,smoother_estimate,osc,pcg_iters,lambda_min,lambda_max,"
         "marked_count\n";
  for (const auto& r : trace.levels)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.level, r.ndof, r.energy_error, r.eta_tilde_total,
                       r.zeta_total, r.smoother_estimate, r.osc, r.pcg_iters, r.lambda_min, r.lambda_max,
                       r.marked_count);
}

} // namespace asfem
