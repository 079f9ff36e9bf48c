#include <gtest/gtest.h>

#include <random>

#include "momtopt/potential_integrals.hpp"
#include "momtopt/quadrature.hpp"

using namespace momtopt;

namespace {

// Polar coordinates about the in-plane projection rho of r, one wedge per
// edge. The radial integrals of 1/R and x/R are done in closed form, leaving
// a smooth angular integrand for Gauss-Legendre. Wedges seen clockwise carry
// a negative angle, so points outside the triangle are handled too.
StaticIntegrals polar_oracle(const Vec3& r, const Vec3& p0, const Vec3& p1, const Vec3& p2, int n = 256) {
  const Vec3 nrm = (p1 - p0).cross(p2 - p0).normalized();
  const double h = std::abs(nrm.dot(r - p0));
  const Vec3 rho = r - nrm.dot(r - p0) * nrm;
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  const Vec3* v[3] = {&p0, &p1, &p2};
  StaticIntegrals out;
  for (int e = 0; e < 3; ++e) {
    const Vec3 ua = *v[e] - rho, ub = *v[(e + 1) % 3] - rho;
    const Vec3 edge = ub - ua;
    const Vec3 foot = ua - (ua.dot(edge) / edge.squaredNorm()) * edge;
    const double d = foot.norm();
    if (d < 1e-14) continue;
    const Vec3 px = foot / d, py = nrm.cross(px);
    const double phi_a = std::atan2(ua.dot(py), ua.dot(px));
    const double span = std::atan2(ua.cross(ub).dot(nrm), ua.dot(ub));
    for (int q = 0; q < n; ++q) {
      const double phi = phi_a + span * x[static_cast<std::size_t>(q)];
      const double S = d / std::cos(phi), Rs = std::hypot(S, h);
      const Vec3 u = std::cos(phi) * px + std::sin(phi) * py;
      const double radial = Rs - h;
      const double second = h > 0.0 ? 0.5 * (S * Rs - h * h * std::log((S + Rs) / h)) : 0.5 * S * S;
      const double wq = span * w[static_cast<std::size_t>(q)];
      out.scalar += wq * radial;
      out.vector += wq * (radial * rho + second * u);
    }
  }
  return out;
}

void expect_close(const StaticIntegrals& got, const StaticIntegrals& ref, double tol) {
  EXPECT_NEAR(got.scalar, ref.scalar, tol * std::abs(ref.scalar));
  EXPECT_LT((got.vector - ref.vector).norm(), tol * std::max(ref.vector.norm(), std::abs(ref.scalar)));
}

const Vec3 A(0.1, -0.2, 0.3), B(1.2, 0.1, 0.25), C(0.4, 0.9, 0.5);

}  // namespace

TEST(StaticIntegrals, FarPointMatchesOracle) {
  const Vec3 r(3.0, -2.0, 4.0);
  expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-10);
}

TEST(StaticIntegrals, CentroidInPlane) {
  const Vec3 r = (A + B + C) / 3.0;
  expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-10);
}

TEST(StaticIntegrals, AtVertexAndEdgeMidpoint) {
  for (const Vec3& r : {A, B, C, Vec3(0.5 * (A + B)), Vec3(0.5 * (B + C))})
    expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-10);
}

TEST(StaticIntegrals, InPlaneOutsideTriangle) {
  const Vec3 r = A + 1.5 * (B - A) + 0.7 * (C - A);
  expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-10);
}

TEST(StaticIntegrals, SlightlyAboveThePlane) {
  const Vec3 nrm = (B - A).cross(C - A).normalized();
  for (double h : {1e-1, 1e-3, 1e-6}) {
    const Vec3 r = (0.2 * A + 0.5 * B + 0.3 * C) + h * nrm;
    expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-8);
  }
}

TEST(StaticIntegrals, RandomPointsProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int i = 0; i < 40; ++i) {
    const Vec3 r(U(rng), U(rng), U(rng));
    expect_close(static_integrals(r, A, B, C), polar_oracle(r, A, B, C), 1e-8);
  }
}

TEST(StaticIntegrals, InvariantUnderVertexOrder) {
  const Vec3 r(0.3, 0.2, 0.35);
  const auto s1 = static_integrals(r, A, B, C);
  const auto s2 = static_integrals(r, C, A, B);
  const auto s3 = static_integrals(r, A, C, B);
  EXPECT_NEAR(s1.scalar, s2.scalar, 1e-13);
  EXPECT_NEAR(s1.scalar, s3.scalar, 1e-13);
  EXPECT_LT((s1.vector - s3.vector).norm(), 1e-13);
}
