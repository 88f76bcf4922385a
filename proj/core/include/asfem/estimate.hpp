#pragma once

#include "asfem/fem.hpp"
#include "asfem/mesh.hpp"
#include "asfem/schwarz.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace asfem {

/// Element residuals r_T = (f + div K grad u_h)|_T and interior edge jumps
/// r_e = K grad u_h|_T1 . n_1 + K grad u_h|_T2 . n_2, sampled at quadrature points.
struct ResidualData {
  struct Samples {
    std::vector<Point> points;
    std::vector<double> weights; // physical measure
    std::vector<double> values;

    double norm_squared() const;
  };

  std::vector<Samples> elements;  // per triangle
  std::vector<Samples> edges;     // per edge, empty on the boundary
  std::vector<double> h_element;  // diameter of T
  std::vector<double> h_edge;     // length of e
};

/// Samples r_T with a triangle rule and r_e with a Gauss rule, both of the given order.
ResidualData residual_data(const FeFunction& u_h, const Coefficient& k, const ScalarField& f, int quadrature_order);

struct ExplicitEstimate {
  std::vector<double> vertex;  // zeta_k
  std::vector<double> element; // zeta_T
};

/// zeta_k^2 = sum_{T in T_k} h_T^2 ||r_T||^2 + sum_{e in E_k} h_e ||r_e||^2 and
/// zeta_T^2 = h_T^2 ||r_T||^2 + 1/2 sum_{interior e in dT} h_e ||r_e||^2.
ExplicitEstimate explicit_estimator(const TriangleMesh& mesh, const ResidualData& data);

/// Span of the volume bubbles phi_T P_{p-1} and the edge bubbles phi_e P_{p-1} of a
/// vertex patch, with linearly dependent combinations filtered out.
class BubbleSpace {
public:
  static BubbleSpace build(const TriangleMesh& mesh, const VertexPatch& patch, int p, const Coefficient& k);

  const VertexPatch& patch() const { return patch_; }
  int degree() const { return p_; }
  int candidate_count() const { return static_cast<int>(candidates_.size()); }
  int dimension() const { return static_cast<int>(coefficients_.cols()); }

  /// Candidate functions on patch triangle t (zero for candidates supported elsewhere).
  void evaluate(int t, const Eigen::Vector2d& xi, std::span<double> values, std::span<Eigen::Vector2d> gradients) const;

  /// Candidate stiffness, before filtering.
  const Eigen::MatrixXd& candidate_stiffness() const { return candidate_stiffness_; }
  /// Columns: retained basis as combinations of candidates.
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  /// Stiffness of the retained basis.
  const Eigen::MatrixXd& stiffness() const { return stiffness_; }

  static constexpr double kRankTolerance = 1e-10;

private:
  struct Candidate {
    int triangle = -1;             // volume bubble of this triangle, or -1
    int edge = -1;                 // edge bubble of this edge, or -1
    std::array<int, 2> monomial{}; // exponents in the scaled patch coordinates
  };

  const TriangleMesh* mesh_ = nullptr;
  VertexPatch patch_;
  std::vector<ElementMap> maps_; // per patch triangle
  int p_ = 1;
  Point center_;
  double scale_ = 1.0;
  std::vector<Candidate> candidates_;
  Eigen::MatrixXd candidate_stiffness_;
  Eigen::MatrixXd coefficients_;
  Eigen::MatrixXd stiffness_;
};

/// eta_tilde_k = ||eta_tilde_k||_A for the discrete local problem on the bubble space.
double patch_estimate(const BubbleSpace& bubble, const ResidualFunctional& r);

/// eta_k^(q): local problem on Lagrange P_{p+q} over the patch with zero trace on
/// the patch boundary, assembled on a standalone patch mesh.
double enriched_patch_estimate(const VertexPatch& patch, const ResidualFunctional& r, int q);

/// The enriched fine space V = P_{p+q} on the current mesh, its operator, the
/// residual over its unknowns and the embedding of V_h.
struct EnrichedProblem {
  std::shared_ptr<const FeSpace> space;
  SparseOperator stiffness;
  Eigen::VectorXd residual;
  SparseOperator coarse_embedding;
  int q = 2;
};

EnrichedProblem enriched_problem(const ResidualFunctional& r, int q);

/// Estimator decomposition: coarse block V_h, local blocks the enriched vertex
/// patch spaces of V (one block per vertex with unknowns).
SubspaceDecomposition estimator_decomposition(const EnrichedProblem& problem);

/// Same coarse block, local blocks the bubble spaces expressed in V; V must
/// contain them (q >= 2).
SubspaceDecomposition bubble_decomposition(const EnrichedProblem& problem, std::span<const BubbleSpace> bubbles);

/// <r, S r> = sum_k <Q_k r, S_k Q_k r>.
double smoother_estimate(const SubspaceDecomposition& d, const Eigen::VectorXd& r);

struct Oscillation {
  std::vector<double> element; // h_T^2 ||f - Q_T f||^2
  double total = 0.0;          // sqrt of the sum
};

/// Q_T is the L2 projection onto P_{p-1}(T).
Oscillation data_oscillation(const TriangleMesh& mesh, const ScalarField& f, int p, int quadrature_order);

struct EstimatorReport {
  std::vector<double> eta_tilde;    // per vertex
  std::vector<double> eta_enriched; // per vertex, eta_k^(q)
  std::vector<double> zeta_vertex;
  std::vector<double> zeta_element;
  std::vector<double> osc_element;
  double eta_tilde_total = 0.0;    // sqrt(sum eta_tilde_k^2)
  double eta_enriched_total = 0.0; // sqrt(sum eta_k^2)
  double zeta_total = 0.0;         // sqrt(sum zeta_k^2)
  double smoother_estimate = 0.0;  // <r, S r>
  double osc = 0.0;
  int q = 2;
};

struct EstimatorOptions {
  int q = 2;
  int quadrature_order = 12;
  bool bubbles = true;
  bool enriched = true;
};

struct EstimatorRun {
  EstimatorReport report;
  std::unique_ptr<EnrichedProblem> enriched;
  std::unique_ptr<SubspaceDecomposition> decomposition;
};

/// All estimators for one Galerkin solution.
EstimatorRun estimate_all(const FeFunction& u_h, const Coefficient& k, const ScalarField& f,
                          const EstimatorOptions& options = {});

/// Rows "kind,id,value"; totals use id "total".
void write_estimator_csv(std::ostream& out, const EstimatorReport& report);

} // namespace asfem
