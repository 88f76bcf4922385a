#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace asfem {

/// Nodal Lagrange basis of total degree `degree` on the reference triangle
/// {(0,0), (1,0), (0,1)}. Node i sits at barycentric counts nodes()[i] / degree
/// with respect to the reference vertices (v0, v1, v2); reference coordinates of
/// a node are (c1, c2) / degree. Vertex nodes come first, in vertex order.
class LagrangeBasis {
public:
  static constexpr int kMaxDegree = 8;

  /// Cached instance; degree in [1, kMaxDegree].
  static const LagrangeBasis& of_degree(int degree);

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<std::array<int, 3>>& nodes() const { return nodes_; }
  Eigen::Vector2d node_point(int i) const;

  void values(const Eigen::Vector2d& xi, std::span<double> out) const;
  void gradients(const Eigen::Vector2d& xi, std::span<Eigen::Vector2d> out) const;
  void hessians(const Eigen::Vector2d& xi, std::span<Eigen::Matrix2d> out) const;

  /// Values and reference gradients of every basis function at every point of the
  /// triangle rule of the given order. Row q holds the basis at point q.
  struct Tabulation {
    int order = 0;
    Eigen::MatrixXd values;           // nq x size
    std::vector<Eigen::MatrixX2d> gradients; // per point: size x 2
  };
  const Tabulation& tabulate(int quadrature_order) const;

private:
  explicit LagrangeBasis(int degree);

  int degree_;
  std::vector<std::array<int, 3>> nodes_;
  std::vector<std::array<int, 2>> monomials_; // exponents (a, b) of x^a y^b
  Eigen::MatrixXd coefficients_;              // column i: monomial coefficients of phi_i
  mutable std::vector<Tabulation> tabulations_;
};

} // namespace asfem
