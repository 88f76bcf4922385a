#include "asfem/lagrange.hpp"

#include "asfem/error.hpp"
#include "asfem/quadrature.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>

namespace asfem {

namespace {

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

} // namespace

const LagrangeBasis& LagrangeBasis::of_degree(int degree) {
  static const std::vector<std::unique_ptr<LagrangeBasis>> cache = [] {
    std::vector<std::unique_ptr<LagrangeBasis>> c;
    c.emplace_back(nullptr);
    for (int d = 1; d <= kMaxDegree; ++d) c.emplace_back(new LagrangeBasis(d));
    return c;
  }();
  if (degree < 1 || degree > kMaxDegree) throw InvalidArgument("LagrangeBasis: unsupported degree");
  return *cache[degree];
}

LagrangeBasis::LagrangeBasis(int degree) : degree_(degree) {
  const int n = degree;
  nodes_.push_back({n, 0, 0});
  nodes_.push_back({0, n, 0});
  nodes_.push_back({0, 0, n});
  for (int i2 = 0; i2 <= n; ++i2) {
    for (int i1 = 0; i1 + i2 <= n; ++i1) {
      const int i0 = n - i1 - i2;
      if (i0 == n || i1 == n || i2 == n) continue;
      nodes_.push_back({i0, i1, i2});
    }
  }
  for (int total = 0; total <= n; ++total)
    for (int b = 0; b <= total; ++b) monomials_.push_back({total - b, b});

  const int size = static_cast<int>(nodes_.size());
  Eigen::MatrixXd vandermonde(size, size);
  for (int i = 0; i < size; ++i) {
    const Eigen::Vector2d x = node_point(i);
    for (int j = 0; j < size; ++j)
      vandermonde(i, j) = ipow(x[0], monomials_[j][0]) * ipow(x[1], monomials_[j][1]);
  }
  // phi_i(x_k) = sum_j C(j,i) m_j(x_k) = delta_ik  =>  V C = I
  coefficients_ = vandermonde.fullPivLu().inverse();
}

Eigen::Vector2d LagrangeBasis::node_point(int i) const {
  const auto& c = nodes_[static_cast<std::size_t>(i)];
  return {static_cast<double>(c[1]) / degree_, static_cast<double>(c[2]) / degree_};
}

void LagrangeBasis::values(const Eigen::Vector2d& xi, std::span<double> out) const {
  const int size = this->size();
  Eigen::VectorXd m(size);
  for (int j = 0; j < size; ++j) m[j] = ipow(xi[0], monomials_[j][0]) * ipow(xi[1], monomials_[j][1]);
  const Eigen::VectorXd v = coefficients_.transpose() * m;
  std::copy(v.data(), v.data() + size, out.begin());
}

void LagrangeBasis::gradients(const Eigen::Vector2d& xi, std::span<Eigen::Vector2d> out) const {
  const int size = this->size();
  Eigen::MatrixX2d dm(size, 2);
  for (int j = 0; j < size; ++j) {
    const auto [a, b] = monomials_[j];
    dm(j, 0) = a > 0 ? a * ipow(xi[0], a - 1) * ipow(xi[1], b) : 0.0;
    dm(j, 1) = b > 0 ? b * ipow(xi[0], a) * ipow(xi[1], b - 1) : 0.0;
  }
  const Eigen::MatrixX2d g = coefficients_.transpose() * dm;
  for (int i = 0; i < size; ++i) out[i] = g.row(i).transpose();
}

void LagrangeBasis::hessians(const Eigen::Vector2d& xi, std::span<Eigen::Matrix2d> out) const {
  const int size = this->size();
  Eigen::MatrixXd d2(size, 3); // xx, xy, yy
  for (int j = 0; j < size; ++j) {
    const auto [a, b] = monomials_[j];
    d2(j, 0) = a > 1 ? a * (a - 1) * ipow(xi[0], a - 2) * ipow(xi[1], b) : 0.0;
    d2(j, 1) = (a > 0 && b > 0) ? a * b * ipow(xi[0], a - 1) * ipow(xi[1], b - 1) : 0.0;
    d2(j, 2) = b > 1 ? b * (b - 1) * ipow(xi[0], a) * ipow(xi[1], b - 2) : 0.0;
  }
  const Eigen::MatrixXd h = coefficients_.transpose() * d2;
  for (int i = 0; i < size; ++i) out[i] << h(i, 0), h(i, 1), h(i, 1), h(i, 2);
}

const LagrangeBasis::Tabulation& LagrangeBasis::tabulate(int quadrature_order) const {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  quadrature_order = std::max(quadrature_order, 1);
  if (tabulations_.empty()) tabulations_.resize(kMaxQuadratureOrder + 1);
  Tabulation& tab = tabulations_.at(static_cast<std::size_t>(quadrature_order));
  if (tab.order == 0) {
    const TriangleRule& rule = triangle_rule(quadrature_order);
    const int nq = static_cast<int>(rule.size());
    tab.values.resize(nq, size());
    tab.gradients.assign(nq, Eigen::MatrixX2d(size(), 2));
    std::vector<double> v(size());
    std::vector<Eigen::Vector2d> g(size());
    for (int q = 0; q < nq; ++q) {
      values(rule.points[q], v);
      gradients(rule.points[q], g);
      for (int i = 0; i < size(); ++i) {
        tab.values(q, i) = v[i];
        tab.gradients[q].row(i) = g[i].transpose();
      }
    }
    tab.order = quadrature_order;
  }
  return tab;
}

} // namespace asfem
