#include "asfem/fem.hpp"

#include "asfem/error.hpp"
#include "asfem/krylov.hpp"
#include "asfem/lagrange.hpp"
#include "asfem/quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <string>

namespace asfem {

// ---------------------------------------------------------------- Coefficient

Coefficient::Coefficient(std::vector<Eigen::Matrix2d> matrices, bool uniform)
    : matrices_(std::move(matrices)), uniform_(uniform) {
  if (matrices_.empty()) throw InvalidArgument("Coefficient: no region matrices");
  alpha_lower_ = std::numeric_limits<double>::infinity();
  alpha_upper_ = 0.0;
  for (const auto& k : matrices_) {
    if (std::abs(k(0, 1) - k(1, 0)) > 1e-14 * k.norm()) throw InvalidArgument("Coefficient: K is not symmetric");
    const Eigen::Vector2d eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(k).eigenvalues();
    if (!(eig[0] > 0.0)) throw InvalidArgument("Coefficient: K is not positive definite");
    alpha_lower_ = std::min(alpha_lower_, eig[0]);
    alpha_upper_ = std::max(alpha_upper_, eig[1]);
  }
}

Coefficient Coefficient::uniform(const Eigen::Matrix2d& k) { return Coefficient({k}, true); }

Coefficient Coefficient::piecewise(std::vector<Eigen::Matrix2d> per_region) {
  return Coefficient(std::move(per_region), false);
}

const Eigen::Matrix2d& Coefficient::on_region(int region) const {
  if (uniform_) return matrices_.front();
  if (region < 0 || region >= static_cast<int>(matrices_.size()))
    throw InvalidArgument("Coefficient: no K for region id " + std::to_string(region));
  return matrices_[static_cast<std::size_t>(region)];
}

Coefficient Coefficient::scaled(double c) const {
  std::vector<Eigen::Matrix2d> m = matrices_;
  for (auto& k : m) k *= c;
  return Coefficient(std::move(m), uniform_);
}

// ---------------------------------------------------------------- ElementMap

ElementMap ElementMap::of(const TriangleMesh& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  ElementMap map;
  map.origin = mesh.vertex(tri[0]);
  map.jacobian.col(0) = mesh.vertex(tri[1]) - map.origin;
  map.jacobian.col(1) = mesh.vertex(tri[2]) - map.origin;
  map.det = map.jacobian.determinant();
  map.inverse_transpose = map.jacobian.inverse().transpose();
  return map;
}

// ---------------------------------------------------------------- FeSpace

FeSpace::FeSpace(std::shared_ptr<const TriangleMesh> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
  if (!mesh_) throw InvalidArgument("FeSpace: null mesh");
  const LagrangeBasis& basis = LagrangeBasis::of_degree(degree);
  const TriangleMesh& m = *mesh_;
  const int n = degree;
  local_size_ = basis.size();
  const int nv = m.num_vertices(), ne = m.num_edges(), nt = m.num_triangles();
  const int per_edge = n - 1;
  const int per_cell = (n - 1) * (n - 2) / 2;
  const int ndofs = nv + ne * per_edge + nt * per_cell;

  dof_points_.assign(static_cast<std::size_t>(ndofs), Point::Zero());
  std::vector<char> interior(static_cast<std::size_t>(ndofs), 1);
  element_dofs_.resize(static_cast<std::size_t>(nt * local_size_));

  for (int t = 0; t < nt; ++t) {
    const auto& tri = m.triangle(t);
    const auto& tedges = m.triangle_edges(t);
    int cell_counter = 0;
    for (int i = 0; i < local_size_; ++i) {
      const auto& c = basis.nodes()[static_cast<std::size_t>(i)];
      int dof = -1;
      bool on_boundary = false;
      int zero = -1, zeros = 0;
      for (int j = 0; j < 3; ++j)
        if (c[j] == 0) zero = j, ++zeros;
      if (c[0] == n || c[1] == n || c[2] == n) {
        const int j = c[0] == n ? 0 : (c[1] == n ? 1 : 2);
        dof = tri[j];
        on_boundary = m.is_boundary_vertex(tri[j]);
      } else if (zeros == 1) {
        const int e = tedges[zero];
        const int a = (zero + 1) % 3, b = (zero + 2) % 3;
        const int pos = tri[a] == m.edge(e).vertices[0] ? c[b] : c[a];
        dof = nv + e * per_edge + (pos - 1);
        on_boundary = m.edge(e).is_boundary();
      } else {
        dof = nv + ne * per_edge + t * per_cell + cell_counter++;
      }
      element_dofs_[static_cast<std::size_t>(t * local_size_ + i)] = dof;
      dof_points_[static_cast<std::size_t>(dof)] =
          (c[0] * m.vertex(tri[0]) + c[1] * m.vertex(tri[1]) + c[2] * m.vertex(tri[2])) / static_cast<double>(n);
      if (on_boundary) interior[static_cast<std::size_t>(dof)] = 0;
    }
  }

  unknown_of_dof_.assign(static_cast<std::size_t>(ndofs), -1);
  for (int d = 0; d < ndofs; ++d) {
    if (!interior[static_cast<std::size_t>(d)]) continue;
    unknown_of_dof_[static_cast<std::size_t>(d)] = static_cast<int>(unknown_dofs_.size());
    unknown_dofs_.push_back(d);
  }
}

std::span<const int> FeSpace::element_dofs(int t) const {
  return std::span<const int>(element_dofs_).subspan(static_cast<std::size_t>(t * local_size_),
                                                     static_cast<std::size_t>(local_size_));
}

Eigen::VectorXd FeSpace::to_unknowns(const Eigen::VectorXd& all) const {
  if (all.size() != num_dofs()) throw InvalidArgument("FeSpace::to_unknowns: size mismatch");
  Eigen::VectorXd out(num_unknowns());
  for (int u = 0; u < num_unknowns(); ++u) out[u] = all[unknown_dofs_[static_cast<std::size_t>(u)]];
  return out;
}

Eigen::VectorXd FeSpace::from_unknowns(const Eigen::VectorXd& unknowns) const {
  if (unknowns.size() != num_unknowns()) throw InvalidArgument("FeSpace::from_unknowns: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(num_dofs());
  for (int u = 0; u < num_unknowns(); ++u) out[unknown_dofs_[static_cast<std::size_t>(u)]] = unknowns[u];
  return out;
}

// ---------------------------------------------------------------- FeFunction

FeFunction::FeFunction(std::shared_ptr<const FeSpace> space, Eigen::VectorXd values)
    : space_(std::move(space)), values_(std::move(values)) {
  if (!space_) throw InvalidArgument("FeFunction: null space");
  if (values_.size() != space_->num_dofs()) throw InvalidArgument("FeFunction: length does not match dof count");
}

FeFunction FeFunction::zero(std::shared_ptr<const FeSpace> space) {
  const int n = space->num_dofs();
  return FeFunction(std::move(space), Eigen::VectorXd::Zero(n));
}

double FeFunction::value(int t, const Eigen::Vector2d& xi) const {
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space_->degree());
  std::vector<double> phi(static_cast<std::size_t>(basis.size()));
  basis.values(xi, phi);
  const auto dofs = space_->element_dofs(t);
  double v = 0.0;
  for (int i = 0; i < basis.size(); ++i) v += values_[dofs[i]] * phi[static_cast<std::size_t>(i)];
  return v;
}

Eigen::Vector2d FeFunction::gradient(int t, const Eigen::Vector2d& xi) const {
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space_->degree());
  std::vector<Eigen::Vector2d> g(static_cast<std::size_t>(basis.size()));
  basis.gradients(xi, g);
  const auto dofs = space_->element_dofs(t);
  Eigen::Vector2d ref = Eigen::Vector2d::Zero();
  for (int i = 0; i < basis.size(); ++i) ref += values_[dofs[i]] * g[static_cast<std::size_t>(i)];
  return ElementMap::of(space_->mesh(), t).inverse_transpose * ref;
}

Eigen::Matrix2d FeFunction::hessian(int t, const Eigen::Vector2d& xi) const {
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space_->degree());
  std::vector<Eigen::Matrix2d> h(static_cast<std::size_t>(basis.size()));
  basis.hessians(xi, h);
  const auto dofs = space_->element_dofs(t);
  Eigen::Matrix2d ref = Eigen::Matrix2d::Zero();
  for (int i = 0; i < basis.size(); ++i) ref += values_[dofs[i]] * h[static_cast<std::size_t>(i)];
  const Eigen::Matrix2d jit = ElementMap::of(space_->mesh(), t).inverse_transpose;
  return jit * ref * jit.transpose();
}

FeFunction interpolate(std::shared_ptr<const FeSpace> space, const ScalarField& g) {
  Eigen::VectorXd values(space->num_dofs());
  for (int d = 0; d < space->num_dofs(); ++d) values[d] = g(space->dof_point(d));
  return FeFunction(std::move(space), std::move(values));
}

// ---------------------------------------------------------------- assembly

namespace {

int row_index(const FeSpace& space, int dof, BoundaryMode mode) {
  return mode == BoundaryMode::keep_all ? dof : space.unknown(dof);
}

int system_size(const FeSpace& space, BoundaryMode mode) {
  return mode == BoundaryMode::keep_all ? space.num_dofs() : space.num_unknowns();
}

} // namespace

SparseOperator assemble_stiffness(const FeSpace& space, const Coefficient& k, BoundaryMode mode) {
  const TriangleMesh& mesh = space.mesh();
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space.degree());
  const int order = std::max(2 * (space.degree() - 1), 1);
  const TriangleRule& rule = triangle_rule(order);
  const auto& tab = basis.tabulate(order);
  const int nloc = basis.size();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_triangles() * nloc * nloc));
  Eigen::MatrixXd local(nloc, nloc);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh, t);
    const Eigen::Matrix2d& kt = k.on_region(mesh.region(t));
    local.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Eigen::MatrixX2d g = tab.gradients[q] * map.inverse_transpose.transpose();
      local.noalias() += (rule.weights[q] * std::abs(map.det)) * (g * kt * g.transpose());
    }
    const auto dofs = space.element_dofs(t);
    for (int i = 0; i < nloc; ++i) {
      const int r = row_index(space, dofs[i], mode);
      if (r < 0) continue;
      for (int j = 0; j < nloc; ++j) {
        const int c = row_index(space, dofs[j], mode);
        if (c >= 0) triplets.emplace_back(r, c, local(i, j));
      }
    }
  }
  const int n = system_size(space, mode);
  SparseOperator a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

Eigen::VectorXd assemble_load(const FeSpace& space, const ScalarField& f, int quadrature_order, BoundaryMode mode) {
  const TriangleMesh& mesh = space.mesh();
  const LagrangeBasis& basis = LagrangeBasis::of_degree(space.degree());
  const int order = quadrature_order > 0 ? quadrature_order : 2 * space.degree();
  const TriangleRule& rule = triangle_rule(order);
  const auto& tab = basis.tabulate(order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(system_size(space, mode));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh, t);
    const auto dofs = space.element_dofs(t);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * std::abs(map.det) * f(map.to_physical(rule.points[q]));
      for (int i = 0; i < basis.size(); ++i) {
        const int r = row_index(space, dofs[i], mode);
        if (r >= 0) b[r] += w * tab.values(static_cast<Eigen::Index>(q), i);
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------- solves

Eigen::VectorXd solve_spd(const SparseOperator& a, const Eigen::VectorXd& b, const SolveOptions& options) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw InvalidArgument("solve_spd: dimension mismatch");
  if (b.size() == 0) return b;
  switch (options.kind) {
  case SolverKind::direct_dense: {
    Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(a)};
    if (llt.info() != Eigen::Success) throw SolverError("direct_dense: matrix is singular or not positive definite");
    return llt.solve(b);
  }
  case SolverKind::sparse_direct: {
    Eigen::SimplicialLDLT<SparseOperator> ldlt(a);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw SolverError("sparse_direct: matrix is singular or not positive definite");
    return ldlt.solve(b);
  }
  case SolverKind::pcg: {
    const Eigen::VectorXd inv_diag = a.diagonal().cwiseInverse();
    const LinearMap apply_a = [&a](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = a * x; };
    const LinearMap jacobi = [&inv_diag](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
      y = inv_diag.cwiseProduct(x);
    };
    return pcg(apply_a, jacobi, b, options.rel_tol, options.max_iterations).solution;
  }
  }
  throw InvalidArgument("solve_spd: unknown solver");
}

FeFunction galerkin_solve(std::shared_ptr<const FeSpace> space, const SparseOperator& a, const Eigen::VectorXd& b,
                          const SolveOptions& options) {
  if (a.rows() != space->num_unknowns()) throw InvalidArgument("galerkin_solve: operator does not match the space");
  Eigen::VectorXd all = space->from_unknowns(solve_spd(a, b, options));
  return FeFunction(std::move(space), std::move(all));
}

double energy_norm(const SparseOperator& a, const Eigen::VectorXd& v) {
  if (a.cols() != v.size() || a.rows() != v.size()) throw InvalidArgument("energy_norm: dimension mismatch");
  return std::sqrt(std::max(0.0, v.dot(a * v)));
}

// ---------------------------------------------------------------- residual

ResidualFunctional::ResidualFunctional(FeFunction u_h, Coefficient k, ScalarField f, int quadrature_order)
    : u_h_(std::move(u_h)), k_(std::move(k)), f_(std::move(f)), order_(quadrature_order) {
  if (order_ < 1) throw InvalidArgument("ResidualFunctional: quadrature order must be >= 1");
}

void ResidualFunctional::for_each_element(
    const FeSpace& test_space, const std::function<void(int, const Eigen::VectorXd&)>& sink) const {
  if (test_space.mesh_ptr() != u_h_.space().mesh_ptr() && &test_space.mesh() != &mesh())
    throw InvalidArgument("ResidualFunctional: test function lives on a different mesh");
  const LagrangeBasis& basis = LagrangeBasis::of_degree(test_space.degree());
  const LagrangeBasis& ubasis = LagrangeBasis::of_degree(u_h_.space().degree());
  const TriangleRule& rule = triangle_rule(order_);
  const auto& tab = basis.tabulate(order_);
  const auto& utab = ubasis.tabulate(order_);
  Eigen::VectorXd local(basis.size());
  for (int t = 0; t < mesh().num_triangles(); ++t) {
    const ElementMap map = ElementMap::of(mesh(), t);
    const Eigen::Matrix2d& kt = k_.on_region(mesh().region(t));
    const auto udofs = u_h_.space().element_dofs(t);
    local.setZero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector2d gu = Eigen::Vector2d::Zero();
      for (int j = 0; j < ubasis.size(); ++j) gu += u_h_.values()[udofs[j]] * utab.gradients[q].row(j).transpose();
      // grad psi . K grad u_h with grad psi = J^{-T} ghat  =>  ghat . (J^{-1} K grad u_h)
      const Eigen::Vector2d flux = map.inverse_transpose.transpose() * (kt * (map.inverse_transpose * gu));
      const double w = rule.weights[q] * std::abs(map.det);
      const double fq = f_(map.to_physical(rule.points[q]));
      local.noalias() += w * (fq * tab.values.row(static_cast<Eigen::Index>(q)).transpose() - tab.gradients[q] * flux);
    }
    sink(t, local);
  }
}

double ResidualFunctional::operator()(const FeFunction& v) const {
  double total = 0.0;
  for_each_element(v.space(), [&](int t, const Eigen::VectorXd& local) {
    const auto dofs = v.space().element_dofs(t);
    for (Eigen::Index i = 0; i < local.size(); ++i) total += local[i] * v.values()[dofs[static_cast<std::size_t>(i)]];
  });
  return total;
}

Eigen::VectorXd ResidualFunctional::on_space(const FeSpace& test_space) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(test_space.num_unknowns());
  for_each_element(test_space, [&](int t, const Eigen::VectorXd& local) {
    const auto dofs = test_space.element_dofs(t);
    for (Eigen::Index i = 0; i < local.size(); ++i) {
      const int u = test_space.unknown(dofs[static_cast<std::size_t>(i)]);
      if (u >= 0) out[u] += local[i];
    }
  });
  return out;
}

Eigen::VectorXd ResidualFunctional::on_element(int t, int count, const LocalBasis& local_basis) const {
  const LagrangeBasis& ubasis = LagrangeBasis::of_degree(u_h_.space().degree());
  const TriangleRule& rule = triangle_rule(order_);
  const auto& utab = ubasis.tabulate(order_);
  const ElementMap map = ElementMap::of(mesh(), t);
  const Eigen::Matrix2d& kt = k_.on_region(mesh().region(t));
  const auto udofs = u_h_.space().element_dofs(t);
  std::vector<double> values(static_cast<std::size_t>(count));
  std::vector<Eigen::Vector2d> grads(static_cast<std::size_t>(count));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    Eigen::Vector2d gu = Eigen::Vector2d::Zero();
    for (int j = 0; j < ubasis.size(); ++j) gu += u_h_.values()[udofs[j]] * utab.gradients[q].row(j).transpose();
    const Eigen::Vector2d flux = kt * (map.inverse_transpose * gu);
    const double w = rule.weights[q] * std::abs(map.det);
    const double fq = f_(map.to_physical(rule.points[q]));
    local_basis(rule.points[q], values, grads);
    for (int i = 0; i < count; ++i)
      out[i] += w * (fq * values[static_cast<std::size_t>(i)] - grads[static_cast<std::size_t>(i)].dot(flux));
  }
  return out;
}

// ---------------------------------------------------------------- transfer

SparseOperator interpolation_matrix(const FeSpace& coarse, const FeSpace& fine, std::span<const int> fine_to_coarse) {
  const TriangleMesh& fmesh = fine.mesh();
  if (static_cast<int>(fine_to_coarse.size()) != fmesh.num_triangles())
    throw InvalidArgument("interpolation_matrix: triangle map has the wrong length");
  const LagrangeBasis& cbasis = LagrangeBasis::of_degree(coarse.degree());
  std::vector<double> phi(static_cast<std::size_t>(cbasis.size()));
  std::vector<char> done(static_cast<std::size_t>(fine.num_dofs()), 0);
  std::vector<Eigen::Triplet<double>> triplets;
  for (int t = 0; t < fmesh.num_triangles(); ++t) {
    const int c = fine_to_coarse[static_cast<std::size_t>(t)];
    if (c < 0 || c >= coarse.mesh().num_triangles()) throw InvalidArgument("interpolation_matrix: bad coarse triangle");
    const ElementMap cmap = ElementMap::of(coarse.mesh(), c);
    const auto cdofs = coarse.element_dofs(c);
    for (int d : fine.element_dofs(t)) {
      const int row = fine.unknown(d);
      if (row < 0 || done[static_cast<std::size_t>(d)]) continue;
      done[static_cast<std::size_t>(d)] = 1;
      cbasis.values(cmap.to_reference(fine.dof_point(d)), phi);
      for (int j = 0; j < cbasis.size(); ++j) {
        const int col = coarse.unknown(cdofs[j]);
        const double v = phi[static_cast<std::size_t>(j)];
        if (col >= 0 && std::abs(v) > 1e-13) triplets.emplace_back(row, col, v);
      }
    }
  }
  SparseOperator p(fine.num_unknowns(), coarse.num_unknowns());
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

std::vector<int> identity_triangle_map(const TriangleMesh& mesh) {
  std::vector<int> map(static_cast<std::size_t>(mesh.num_triangles()));
  for (int t = 0; t < mesh.num_triangles(); ++t) map[static_cast<std::size_t>(t)] = t;
  return map;
}

} // namespace asfem
