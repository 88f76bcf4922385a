#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace asfem {

/// Quadrature rule on the reference triangle {(0,0), (1,0), (0,1)}.
/// Weights sum to 1/2 (the reference area).
struct TriangleRule {
  int order = 0; ///< exact for polynomials of total degree <= order
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre rule on [0, 1]; weights sum to 1.
struct LineRule {
  int order = 0;
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

inline constexpr int kMaxQuadratureOrder = 40;

/// Rule exact to at least `order` (clamped to >= 1). Symmetric Dunavant rules up to
/// order 5, collapsed Gauss-Legendre products above.
const TriangleRule& triangle_rule(int order);

/// n-point Gauss-Legendre rule on [0, 1], exact to order 2n-1.
LineRule gauss_legendre(int n);

/// Cached Gauss-Legendre rule exact to at least `order`.
const LineRule& line_rule(int order);

} // namespace asfem
