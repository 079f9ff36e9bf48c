#include <gtest/gtest.h>

#include <cmath>

#include "momtopt/quadrature.hpp"

using namespace momtopt;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// \int x^a y^b over the unit right triangle.
double monomial_exact(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

double monomial_rule(const TriangleRule& r, int a, int b) {
  double s = 0.0;
  for (std::size_t q = 0; q < r.size(); ++q) {
    const double x = r.bary[q][1], y = r.bary[q][2];
    s += r.weights[q] * std::pow(x, a) * std::pow(y, b);
  }
  return 0.5 * s;
}

}  // namespace

class DunavantExactness : public ::testing::TestWithParam<int> {};

TEST_P(DunavantExactness, IntegratesMonomialsUpToDegree) {
  const int deg = GetParam();
  const TriangleRule r = dunavant_rule(deg);
  double wsum = 0.0;
  for (double w : r.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-13);
  for (const auto& b : r.bary) EXPECT_NEAR(b[0] + b[1] + b[2], 1.0, 1e-14);
  for (int a = 0; a <= deg; ++a)
    for (int b = 0; a + b <= deg; ++b)
      EXPECT_NEAR(monomial_rule(r, a, b), monomial_exact(a, b), 1e-13) << "x^" << a << " y^" << b;
}

INSTANTIATE_TEST_SUITE_P(Degrees, DunavantExactness, ::testing::Values(1, 2, 4, 5, 7));

TEST(Dunavant, PointCounts) {
  EXPECT_EQ(dunavant_rule(1).size(), 1u);
  EXPECT_EQ(dunavant_rule(2).size(), 3u);
  EXPECT_EQ(dunavant_rule(4).size(), 6u);
  EXPECT_EQ(dunavant_rule(5).size(), 7u);
  EXPECT_EQ(dunavant_rule(7).size(), 13u);
  EXPECT_THROW(dunavant_rule(3), std::invalid_argument);
}

TEST(Dunavant, NotExactBeyondDegree) {
  const TriangleRule r = dunavant_rule(2);
  EXPECT_GT(std::abs(monomial_rule(r, 3, 0) - monomial_exact(3, 0)), 1e-6);
}

TEST(GaussLegendre, IntegratesPolynomialsOnUnitInterval) {
  std::vector<double> x, w;
  for (int n = 1; n <= 12; ++n) {
    gauss_legendre_01(n, x, w);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], p);
      EXPECT_NEAR(s, 1.0 / (p + 1), 1e-13) << "n=" << n << " p=" << p;
    }
  }
}

TEST(CollapsedGauss, ExactForPolynomials) {
  const TriangleRule r = collapsed_gauss_rule(6);
  for (int a = 0; a <= 8; ++a)
    for (int b = 0; a + b <= 8; ++b) EXPECT_NEAR(monomial_rule(r, a, b), monomial_exact(a, b), 1e-13);
}

TEST(CollapsedGauss, CancelsInverseDistanceAtCollapsedVertex) {
  // \int 1/|r - v1| over the unit right triangle, v1 = (1, 0). In polar
  // coordinates about v1 the integrand becomes the radial extent of the ray.
  const TriangleRule r = collapsed_gauss_rule(20);
  double q = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = r.bary[i][1], y = r.bary[i][2];
    q += 0.5 * r.weights[i] / std::hypot(x - 1.0, y);
  }
  double ref = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double phi = 0.75 * pi + (pi / 4) * (k + 0.5) / n;
    const double rho = -1.0 / std::cos(phi);
    ref += rho * (pi / 4) / n;
  }
  EXPECT_NEAR(q, ref, 1e-9);
  EXPECT_NEAR(ref, std::log(1.0 + std::sqrt(2.0)), 1e-9);
}
