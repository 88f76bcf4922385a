#pragma once

#include "asfem/estimate.hpp"
#include "asfem/fem.hpp"
#include "asfem/mesh.hpp"
#include "asfem/schwarz.hpp"

#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asfem {

struct ProblemSpec {
  std::string name;
  Domain domain = Domain::unit_square;
  int n0 = 1;
  Coefficient k = Coefficient::identity();
  ScalarField f;
  ScalarField exact;           // empty when no closed form is known
  VectorField exact_gradient;

  bool has_exact() const { return static_cast<bool>(exact) && static_cast<bool>(exact_gradient); }
};

/// unit_square_manufactured, l_shape_constant, checkerboard_constant, zero_source.
ProblemSpec builtin_problem(std::string_view name);
std::vector<std::string> builtin_problem_names();

/// max |-div K grad u - f| / max(1, |f|) over probe points, by central differences
/// of the exact gradient. Zero when the problem has no exact solution.
double check_problem(const ProblemSpec& problem);

/// Greedy bulk marking on squared indicators: largest first (ties by ascending
/// index) until the marked sum reaches theta times the total. Returns sorted ids.
std::vector<int> dorfler_mark(std::span<const double> indicators, double theta);

/// Dorfler on per-vertex squared indicators; marks every triangle of each
/// selected vertex patch.
std::vector<int> dorfler_mark_vertices(const TriangleMesh& mesh, std::span<const double> indicators, double theta);

enum class EstimatorKind { explicit_zeta, bubble_eta, smoother };
enum class RefinementMode { adaptive, uniform };
enum class ErrorMode { automatic, manufactured, deep_refine, none };

EstimatorKind parse_estimator(std::string_view name);
std::string_view to_string(EstimatorKind kind);
RefinementMode parse_refinement(std::string_view name);
std::string_view to_string(RefinementMode mode);
SolverKind parse_solver(std::string_view name);
std::string_view to_string(SolverKind kind);

struct AdaptOptions {
  EstimatorKind estimator = EstimatorKind::explicit_zeta;
  RefinementMode refinement = RefinementMode::adaptive;
  double theta = 0.5;
  int max_dof = 5000;
  int max_levels = 50;
  int p = 1;
  int q = 2;
  SolverKind solver = SolverKind::pcg;
  double rel_tol = 1e-10;
  int quadrature_order = 12;
  bool verify_spectral = false;
  bool verify_identity = false;
  ErrorMode error = ErrorMode::automatic;
  std::shared_ptr<const TriangleMesh> initial_mesh; // overrides the problem's builtin mesh
};

struct LevelRecord {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  int level = 0;
  int ndof = 0;
  double energy_error = nan;
  double eta_tilde_total = nan;
  double zeta_total = nan;
  double smoother_estimate = nan;
  double osc = nan;
  int pcg_iters = 0;
  double lambda_min = nan;
  double lambda_max = nan;
  int marked_count = 0;
  double eta_enriched_total = nan;
  double discrete_energy = nan; // ||u_h||_A^2
};

struct AdaptTrace {
  std::string problem;
  double theta = 0.5;
  std::vector<LevelRecord> levels;
  std::vector<VerificationReport> verification;
  std::shared_ptr<const TriangleMesh> final_mesh;
  EstimatorReport final_report;
  double reference_energy = LevelRecord::nan; // ||u_ref||_A^2, deep_refine only
};

AdaptTrace adapt_loop(const ProblemSpec& problem, const AdaptOptions& options);

/// Galerkin solution of the problem on a mesh, with load quadrature of the given order.
FeFunction solve_problem(const ProblemSpec& problem, std::shared_ptr<const TriangleMesh> mesh, int p,
                         int quadrature_order = 12, const SolveOptions& solve = {SolverKind::sparse_direct});

enum class ReferenceMode { manufactured, deep_refine };

/// ||u - u_h||_A. manufactured integrates K grad(u - u_h) . grad(u - u_h) with a
/// rule of order >= 2p + 4; deep_refine uses ||u_ref||_A^2 - ||u_h||_A^2 with
/// u_ref on `extra_refinements` uniform refinements of the mesh of u_h.
double reference_energy_error(const ProblemSpec& problem, const FeFunction& u_h, ReferenceMode mode,
                              int extra_refinements = 2, int quadrature_order = 12);

struct RateFit {
  double slope = 0.0;
  std::vector<double> step_slopes;
};

/// Least-squares slope of log(value) against log(ndof).
RateFit fit_rate(std::span<const double> ndof, std::span<const double> values);

/// Column by its CSV name; levels with non-positive values are skipped.
RateFit fit_rate(const AdaptTrace& trace, std::string_view column);

void write_trace_csv(std::ostream& out, const AdaptTrace& trace);

} // namespace asfem
