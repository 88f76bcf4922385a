#include "asfem/quadrature.hpp"

#include "asfem/error.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace asfem {

namespace {

void add_orbit3(TriangleRule& rule, double a, double w) {
  // (a, a, 1-2a) and permutations, weight given relative to unit area
  const double b = 1.0 - 2.0 * a;
  rule.points.emplace_back(a, a);
  rule.points.emplace_back(b, a);
  rule.points.emplace_back(a, b);
  for (int i = 0; i < 3; ++i) rule.weights.push_back(0.5 * w);
}

TriangleRule dunavant(int order) {
  TriangleRule rule;
  rule.order = order;
  switch (order) {
  case 1:
    rule.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    rule.weights.push_back(0.5);
    break;
  case 2:
    add_orbit3(rule, 1.0 / 6.0, 1.0 / 3.0);
    break;
  case 4:
    add_orbit3(rule, 0.445948490915965, 0.223381589678011);
    add_orbit3(rule, 0.091576213509771, 0.109951743655322);
    break;
  case 5:
    rule.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    rule.weights.push_back(0.5 * 0.225);
    add_orbit3(rule, 0.470142064105115, 0.132394152788506);
    add_orbit3(rule, 0.101286507323456, 0.125939180544827);
    break;
  default:
    throw InvalidArgument("no Dunavant table for this order");
  }
  return rule;
}

TriangleRule collapsed(int order) {
  // (x, y) = (u, (1-u) v) with Jacobian (1-u): degree order+1 in u, order in v.
  const int n = (order + 2) / 2 + 1;
  const LineRule gl = gauss_legendre(n);
  TriangleRule rule;
  rule.order = order;
  for (std::size_t i = 0; i < gl.size(); ++i) {
    const double u = gl.points[i];
    for (std::size_t j = 0; j < gl.size(); ++j) {
      const double v = gl.points[j];
      rule.points.emplace_back(u, (1.0 - u) * v);
      rule.weights.push_back(gl.weights[i] * gl.weights[j] * (1.0 - u));
    }
  }
  return rule;
}

} // namespace

LineRule gauss_legendre(int n) {
  if (n < 1) throw InvalidArgument("gauss_legendre: n must be >= 1");
  // Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence
  const auto legendre = [n](double x) {
    double prev = 1.0, cur = x;
    for (int k = 2; k <= n; ++k) {
      const double next = ((2.0 * k - 1.0) * x * cur - (k - 1.0) * prev) / k;
      prev = cur;
      cur = next;
    }
    return std::array<double, 2>{n == 1 ? x : cur, n == 1 ? 1.0 : prev};
  };
  LineRule rule;
  rule.order = 2 * n - 1;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = legendre(x);
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre(x);
    dp = n * (x * pn - pm) / (x * x - 1.0);
    rule.points[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const LineRule& line_rule(int order) {
  static const std::vector<LineRule> rules = [] {
    std::vector<LineRule> r;
    for (int o = 0; o <= kMaxQuadratureOrder; ++o) r.push_back(gauss_legendre(o / 2 + 1));
    return r;
  }();
  if (order > kMaxQuadratureOrder) throw InvalidArgument("line_rule: order too high");
  return rules[std::max(order, 1)];
}

const TriangleRule& triangle_rule(int order) {
  static const std::vector<TriangleRule> rules = [] {
    std::vector<TriangleRule> r;
    r.push_back(dunavant(1));
    r.push_back(dunavant(1));
    r.push_back(dunavant(2));
    r.push_back(dunavant(4));
    r.push_back(dunavant(4));
    r.push_back(dunavant(5));
    for (int o = 6; o <= kMaxQuadratureOrder; ++o) r.push_back(collapsed(o));
    r[3].order = 3;
    return r;
  }();
  if (order > kMaxQuadratureOrder) throw InvalidArgument("triangle_rule: order too high");
  return rules[std::max(order, 1)];
}

} // namespace asfem
