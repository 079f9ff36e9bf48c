#include <gtest/gtest.h>

#include <random>

#include "momtopt/material_model.hpp"

using namespace momtopt;

TEST(Ramp, EndpointsAndMonotone) {
  for (double p : {0.0, 1.0, 3.0}) {
    EXPECT_EQ(ramp(0.0, p), 0.0);
    EXPECT_EQ(ramp(1.0, p), 1.0);
    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
      const double f = ramp(i / 100.0, p);
      EXPECT_GT(f, prev);
      prev = f;
    }
  }
  EXPECT_DOUBLE_EQ(ramp(0.5, 1.0), 1.0 / 3.0);
}

TEST(Ramp, DerivativeMatchesFiniteDifference) {
  for (double p : {0.0, 1.0, 2.5})
    for (double r : {0.05, 0.3, 0.5, 0.77, 0.95}) {
      const double h = 1e-6;
      EXPECT_NEAR(ramp_derivative(r, p), (ramp(r + h, p) - ramp(r - h, p)) / (2 * h), 1e-8);
    }
}

TEST(Ramp, OutOfRangeIsDomainError) {
  EXPECT_THROW(ramp(-0.01, 1.0), std::domain_error);
  EXPECT_THROW(ramp(1.01, 1.0), std::domain_error);
  EXPECT_THROW(ramp_derivative(std::nan(""), 1.0), std::domain_error);
}

TEST(Resistivity, EndpointsAreVacuumAndMetal) {
  const InterpolationSpec s;
  EXPECT_DOUBLE_EQ(surface_resistivity(0.0, s), 1e5);
  EXPECT_DOUBLE_EQ(surface_resistivity(1.0, s), 1.0);
}

TEST(Resistivity, LogIsLinearInRamp) {
  const InterpolationSpec s{2.0, 3e4, 1.5};
  for (double r : {0.1, 0.4, 0.9}) {
    const double expect = std::log(3e4) + ramp(r, 1.5) * (std::log(2.0) - std::log(3e4));
    EXPECT_NEAR(std::log(surface_resistivity(r, s)), expect, 1e-12);
  }
}

TEST(Resistivity, DerivativeMatchesFiniteDifference) {
  const InterpolationSpec s;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.01, 0.99);
  for (int i = 0; i < 50; ++i) {
    const double r = U(rng), h = 1e-6;
    const double fd = (surface_resistivity(r + h, s) - surface_resistivity(r - h, s)) / (2 * h);
    EXPECT_NEAR(d_surface_resistivity(r, s), fd, 1e-6 * std::abs(fd));
  }
}

TEST(Resistivity, InvalidSpecRejected) {
  EXPECT_THROW((InterpolationSpec{0.0, 1e5, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((InterpolationSpec{10.0, 1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((InterpolationSpec{1.0, 1e5, -1.0}.validate()), std::invalid_argument);
}

TEST(Zrho, SystemMatrixAddsMaterialPart) {
  const TriMesh m = generate_plate(1.0, 0.6, 3, 2);
  const BasisSet b = build_rwg(m);
  const auto psi = assemble_material_elements(m, b);
  const auto N = static_cast<Eigen::Index>(b.N());
  std::vector<double> rho(m.triangle_count());
  for (std::size_t t = 0; t < rho.size(); ++t) rho[t] = (t % 7) / 6.0;
  const InterpolationSpec s;
  const MatrixXcd Z0 = MatrixXcd::Random(N, N);
  const MatrixXd Zr = assemble_Zrho(rho, psi, s, N);
  EXPECT_LT((system_matrix(Z0, rho, psi, s) - Z0 - Zr.cast<cplx>()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((Zr - Zr.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Zrho, UniformResistivityIsScaledGram) {
  const TriMesh m = generate_plate(1.0, 0.6, 3, 2);
  const BasisSet b = build_rwg(m);
  const auto psi = assemble_material_elements(m, b);
  const auto N = static_cast<Eigen::Index>(b.N());
  const std::vector<double> ones(m.triangle_count(), 1.0), rs(m.triangle_count(), 7.0);
  const MatrixXd G = assemble_Zrho_from_resistivity(ones, psi, N);
  EXPECT_LT((assemble_Zrho_from_resistivity(rs, psi, N) - 7.0 * G).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(assemble_Zrho_from_resistivity(std::vector<double>(3, 1.0), psi, N), std::invalid_argument);
}
