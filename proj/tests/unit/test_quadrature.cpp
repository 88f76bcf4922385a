#include "asfem/lagrange.hpp"
#include "asfem/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace asfem;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// int_{ref} x^a y^b = a! b! / (a + b + 2)!
double monomial_integral(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

} // namespace

TEST(TriangleRule, WeightsSumToReferenceArea) {
  for (int order = 1; order <= 30; ++order) {
    const TriangleRule& rule = triangle_rule(order);
    double sum = 0.0;
    for (double w : rule.weights) sum += w;
    EXPECT_NEAR(sum, 0.5, 1e-14) << "order " << order;
    EXPECT_GE(rule.order, order);
  }
}

TEST(TriangleRule, IntegratesMonomialsExactly) {
  for (int order = 1; order <= 20; ++order) {
    const TriangleRule& rule = triangle_rule(order);
    for (int a = 0; a <= order; ++a) {
      for (int b = 0; a + b <= order; ++b) {
        double q = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i)
          q += rule.weights[i] * std::pow(rule.points[i].x(), a) * std::pow(rule.points[i].y(), b);
        const double exact = monomial_integral(a, b);
        EXPECT_NEAR(q, exact, 1e-13 * std::max(1.0, exact)) << "order " << order << " x^" << a << " y^" << b;
      }
    }
  }
}

TEST(TriangleRule, PointsInsideReferenceTriangle) {
  for (int order : {1, 2, 3, 4, 5, 8, 12, 20}) {
    for (const auto& p : triangle_rule(order).points) {
      EXPECT_GT(p.x(), 0.0);
      EXPECT_GT(p.y(), 0.0);
      EXPECT_LT(p.x() + p.y(), 1.0);
    }
  }
}

TEST(GaussLegendre, ExactToDegree2nMinus1) {
  for (int n = 1; n <= 12; ++n) {
    const LineRule rule = gauss_legendre(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double q = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) q += rule.weights[i] * std::pow(rule.points[i], d);
      EXPECT_NEAR(q, 1.0 / (d + 1), 1e-14) << "n " << n << " degree " << d;
    }
  }
}

TEST(LagrangeBasis, KroneckerAtNodes) {
  for (int p = 1; p <= 5; ++p) {
    const LagrangeBasis& basis = LagrangeBasis::of_degree(p);
    EXPECT_EQ(basis.size(), (p + 1) * (p + 2) / 2);
    std::vector<double> v(static_cast<std::size_t>(basis.size()));
    for (int i = 0; i < basis.size(); ++i) {
      basis.values(basis.node_point(i), v);
      for (int j = 0; j < basis.size(); ++j) EXPECT_NEAR(v[static_cast<std::size_t>(j)], i == j ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(LagrangeBasis, PartitionOfUnity) {
  const Eigen::Vector2d xi(0.23, 0.41);
  for (int p = 1; p <= 6; ++p) {
    const LagrangeBasis& basis = LagrangeBasis::of_degree(p);
    std::vector<double> v(static_cast<std::size_t>(basis.size()));
    std::vector<Eigen::Vector2d> g(static_cast<std::size_t>(basis.size()));
    std::vector<Eigen::Matrix2d> h(static_cast<std::size_t>(basis.size()));
    basis.values(xi, v);
    basis.gradients(xi, g);
    basis.hessians(xi, h);
    double s = 0.0;
    Eigen::Vector2d gs = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hs = Eigen::Matrix2d::Zero();
    for (int i = 0; i < basis.size(); ++i) {
      s += v[static_cast<std::size_t>(i)];
      gs += g[static_cast<std::size_t>(i)];
      hs += h[static_cast<std::size_t>(i)];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_LT(gs.norm(), 1e-10);
    EXPECT_LT(hs.norm(), 1e-8);
  }
}

TEST(LagrangeBasis, VertexNodesFirst) {
  const auto& nodes = LagrangeBasis::of_degree(3).nodes();
  EXPECT_EQ(nodes[0], (std::array<int, 3>{3, 0, 0}));
  EXPECT_EQ(nodes[1], (std::array<int, 3>{0, 3, 0}));
  EXPECT_EQ(nodes[2], (std::array<int, 3>{0, 0, 3}));
}

TEST(LagrangeBasis, GradientMatchesFiniteDifference) {
  const LagrangeBasis& basis = LagrangeBasis::of_degree(3);
  const Eigen::Vector2d xi(0.3, 0.2);
  const double h = 1e-6;
  std::vector<double> vp(10), vm(10);
  std::vector<Eigen::Vector2d> g(10);
  basis.gradients(xi, g);
  for (int d = 0; d < 2; ++d) {
    Eigen::Vector2d e = Eigen::Vector2d::Zero();
    e[d] = h;
    basis.values(xi + e, vp);
    basis.values(xi - e, vm);
    for (int i = 0; i < 10; ++i) EXPECT_NEAR((vp[i] - vm[i]) / (2 * h), g[i][d], 1e-7);
  }
}
