#pragma once

#include "asfem/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace asfem {

using SparseOperator = Eigen::SparseMatrix<double>;
using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Eigen::Vector2d(const Point&)>;

/// Piecewise-constant symmetric positive definite diffusion tensor, one per region id.
class Coefficient {
public:
  /// K = I on every region.
  static Coefficient identity() { return uniform(Eigen::Matrix2d::Identity()); }
  /// The same K on every region.
  static Coefficient uniform(const Eigen::Matrix2d& k);
  /// K = per_region[id]; a triangle with region id outside the list is an error.
  static Coefficient piecewise(std::vector<Eigen::Matrix2d> per_region);

  const Eigen::Matrix2d& on_region(int region) const;
  double alpha_lower() const { return alpha_lower_; }
  double alpha_upper() const { return alpha_upper_; }
  Coefficient scaled(double c) const;
  bool is_uniform() const { return uniform_; }
  const std::vector<Eigen::Matrix2d>& matrices() const { return matrices_; }

private:
  Coefficient(std::vector<Eigen::Matrix2d> matrices, bool uniform);
  std::vector<Eigen::Matrix2d> matrices_;
  bool uniform_ = true;
  double alpha_lower_ = 1.0;
  double alpha_upper_ = 1.0;
};

/// Affine map from the reference triangle onto mesh triangle t.
struct ElementMap {
  Point origin;
  Eigen::Matrix2d jacobian;
  Eigen::Matrix2d inverse_transpose;
  double det = 0.0;

  static ElementMap of(const TriangleMesh& mesh, int t);
  Point to_physical(const Eigen::Vector2d& xi) const { return origin + jacobian * xi; }
  Eigen::Vector2d to_reference(const Point& x) const { return inverse_transpose.transpose() * (x - origin); }
};

/// Continuous Lagrange space of degree p on a triangulation. Dofs are numbered
/// vertices first, then edge nodes (ordered from the lower vertex id), then
/// element-interior nodes. Boundary dofs are excluded from the unknowns.
class FeSpace {
public:
  FeSpace(std::shared_ptr<const TriangleMesh> mesh, int degree);

  const TriangleMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const TriangleMesh>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int num_dofs() const { return static_cast<int>(dof_points_.size()); }
  int num_unknowns() const { return static_cast<int>(unknown_dofs_.size()); }
  int dofs_per_element() const { return local_size_; }

  std::span<const int> element_dofs(int t) const;
  const Point& dof_point(int d) const { return dof_points_[static_cast<std::size_t>(d)]; }
  bool is_interior_dof(int d) const { return unknown_of_dof_[static_cast<std::size_t>(d)] >= 0; }
  /// Unknown index of dof d, -1 on the boundary.
  int unknown(int d) const { return unknown_of_dof_[static_cast<std::size_t>(d)]; }
  const std::vector<int>& unknown_dofs() const { return unknown_dofs_; }

  Eigen::VectorXd to_unknowns(const Eigen::VectorXd& all) const;
  Eigen::VectorXd from_unknowns(const Eigen::VectorXd& unknowns) const;

private:
  std::shared_ptr<const TriangleMesh> mesh_;
  int degree_;
  int local_size_;
  std::vector<int> element_dofs_;
  std::vector<Point> dof_points_;
  std::vector<int> unknown_of_dof_;
  std::vector<int> unknown_dofs_;
};

/// Coefficient vector over all dofs of a space; boundary entries are zero for V_h members.
class FeFunction {
public:
  FeFunction(std::shared_ptr<const FeSpace> space, Eigen::VectorXd values);
  static FeFunction zero(std::shared_ptr<const FeSpace> space);

  const FeSpace& space() const { return *space_; }
  const std::shared_ptr<const FeSpace>& space_ptr() const { return space_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  double value(int t, const Eigen::Vector2d& xi) const;
  Eigen::Vector2d gradient(int t, const Eigen::Vector2d& xi) const;
  Eigen::Matrix2d hessian(int t, const Eigen::Vector2d& xi) const;

private:
  std::shared_ptr<const FeSpace> space_;
  Eigen::VectorXd values_;
};

/// Nodal interpolant of g in the space (boundary values are kept as interpolated).
FeFunction interpolate(std::shared_ptr<const FeSpace> space, const ScalarField& g);

enum class BoundaryMode {
  eliminate, ///< rows/columns over interior unknowns only (homogeneous Dirichlet)
  keep_all,  ///< every dof, no boundary condition
};

/// a(phi_j, phi_i) = int K grad phi_j . grad phi_i.
SparseOperator assemble_stiffness(const FeSpace& space, const Coefficient& k,
                                  BoundaryMode mode = BoundaryMode::eliminate);

/// int f phi_i with a triangle rule of the given order (default 2p).
Eigen::VectorXd assemble_load(const FeSpace& space, const ScalarField& f, int quadrature_order = -1,
                              BoundaryMode mode = BoundaryMode::eliminate);

enum class SolverKind { direct_dense, sparse_direct, pcg };

struct SolveOptions {
  SolverKind kind = SolverKind::pcg;
  double rel_tol = 1e-10;
  int max_iterations = 20000;
};

/// Solves A x = b over the unknowns; PCG uses Jacobi preconditioning here.
Eigen::VectorXd solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, const SolveOptions& options = {});

/// Galerkin solution u_h in V_h (boundary dofs zero).
FeFunction galerkin_solve(std::shared_ptr<const FeSpace> space, const SparseOperator& a, const Eigen::VectorXd& b,
                          const SolveOptions& options = {});

/// sqrt(v^T A v).
double energy_norm(const SparseOperator& a, const Eigen::VectorXd& v);

/// Evaluates `count` test functions on one element at a reference point:
/// values and physical gradients.
using LocalBasis =
    std::function<void(const Eigen::Vector2d& xi, std::span<double> values, std::span<Eigen::Vector2d> gradients)>;

/// The residual r = f - A u_h as a functional: <r, v> = int f v - a(u_h, v).
class ResidualFunctional {
public:
  ResidualFunctional(FeFunction u_h, Coefficient k, ScalarField f, int quadrature_order);

  const TriangleMesh& mesh() const { return u_h_.space().mesh(); }
  const FeFunction& solution() const { return u_h_; }
  const Coefficient& coefficient() const { return k_; }
  const ScalarField& source() const { return f_; }
  int quadrature_order() const { return order_; }

  /// <r, v> for v in any Lagrange space on the same mesh.
  double operator()(const FeFunction& v) const;

  /// Vector of <r, psi_i> over the unknowns of a Lagrange space on the same mesh.
  Eigen::VectorXd on_space(const FeSpace& test_space) const;

  /// Element contributions int_T f psi_i - K grad u_h . grad psi_i for a local family.
  Eigen::VectorXd on_element(int t, int count, const LocalBasis& basis) const;

private:
  void for_each_element(const FeSpace& test_space,
                        const std::function<void(int, const Eigen::VectorXd&)>& sink) const;

  FeFunction u_h_;
  Coefficient k_;
  ScalarField f_;
  int order_;
};

/// Interpolation of `coarse` into `fine` over unknowns (rows fine, columns coarse).
/// `fine_to_coarse[t]` is the coarse triangle containing fine triangle t; the
/// coarse space must be contained in the fine one.
SparseOperator interpolation_matrix(const FeSpace& coarse, const FeSpace& fine, std::span<const int> fine_to_coarse);

/// Identity triangle map, for two spaces on the same mesh.
std::vector<int> identity_triangle_map(const TriangleMesh& mesh);

} // namespace asfem
