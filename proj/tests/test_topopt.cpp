#include <gtest/gtest.h>

#include <random>
#include <set>

#include "momtopt/topopt.hpp"

using namespace momtopt;

namespace {

struct Setup {
  TriMesh mesh;
  BasisSet basis;
  FeedSpec feeds;
  OperatorSet ops;

  Setup(int nx, int ny, double ka)
      : mesh(generate_plate(1.0, 0.6, nx, ny)),
        basis(build_rwg(mesh)),
        feeds(plate_feed(mesh, basis, 1.0, 0.6, nx, ny)),
        ops(build_operators(mesh, basis, ka / mesh.a, feeds)) {}
};

const Setup& small() {
  static const Setup s(3, 2, 0.8);
  return s;
}

const Setup& medium() {
  static const Setup s(6, 4, 0.8);
  return s;
}

}  // namespace

TEST(AreaFraction, Identities) {
  const TriMesh m = generate_plate(1.0, 0.6, 5, 3);
  const auto T = static_cast<Eigen::Index>(m.triangle_count());
  const double A0 = m.total_area();
  EXPECT_NEAR(area_fraction(Eigen::VectorXd::Ones(T), m.areas, A0), 1.0, 1e-14);
  EXPECT_NEAR(area_fraction(Eigen::VectorXd::Constant(T, 0.35), m.areas, A0), 0.35, 1e-14);
}

TEST(AreaFraction, MatchesDirectSummation) {
  const TriMesh m = generate_sphere(2, 1.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::VectorXd r(static_cast<Eigen::Index>(m.triangle_count()));
  for (auto& x : r) x = U(rng);
  long double num = 0.0L, den = 0.0L;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    num += static_cast<long double>(r[static_cast<Eigen::Index>(t)]) * m.areas[t];
    den += m.areas[t];
  }
  EXPECT_NEAR(area_fraction(r, m.areas, m.total_area()), static_cast<double>(num / den), 1e-14);
}

TEST(SeedDesign, ModesAndPinning) {
  const auto& s = small();
  const auto pinned = feed_triangles(s.mesh, s.feeds);
  OptConfig cfg;
  auto check_pins = [&](const DesignField& d) {
    for (int t : pinned) EXPECT_EQ(d.rho[t], 1.0);
  };
  DesignField d = seed_design(cfg, s.mesh, pinned);
  check_pins(d);
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (!d.is_fixed(t)) {
      EXPECT_EQ(d.rho[t], 0.35);
    }

  cfg.seed.mode = SeedMode::UniformValue;
  cfg.seed.value = 0.1;
  d = seed_design(cfg, s.mesh, pinned);
  check_pins(d);
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (!d.is_fixed(t)) {
      EXPECT_EQ(d.rho[t], 0.1);
    }

  cfg.seed.mode = SeedMode::Random;
  cfg.seed.seed = 7;
  const DesignField r1 = seed_design(cfg, s.mesh, pinned), r2 = seed_design(cfg, s.mesh, pinned);
  check_pins(r1);
  EXPECT_EQ(r1.rho, r2.rho);
  cfg.seed.seed = 8;
  EXPECT_NE(seed_design(cfg, s.mesh, pinned).rho, r1.rho);

  cfg.seed.mode = SeedMode::FromFile;
  cfg.seed.values = Eigen::VectorXd::Constant(5, 0.5);
  EXPECT_THROW(seed_design(cfg, s.mesh, pinned), std::invalid_argument);
}

TEST(OptConfig, Validation) {
  OptConfig c;
  EXPECT_NO_THROW(c.validate());
  c.Sf = 1.2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptConfig{};
  c.I_max = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptConfig{};
  c.Rmin = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Optimize, SingleIterationBudgetEvaluatesInitialDesign) {
  const auto& s = small();
  OptConfig cfg;
  cfg.I_max = 1;
  const OptimizationResult r = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.reason, Termination::IterationCap);
  const DesignField d0 = seed_design(cfg, s.mesh, feed_triangles(s.mesh, s.feeds));
  EXPECT_EQ(r.design.rho, d0.rho);
}

TEST(Optimize, ContinuationAndFactorizationInvariants) {
  const auto& s = medium();
  OptConfig cfg;
  cfg.I_max = 120;
  const OptimizationResult r = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  ASSERT_FALSE(r.records.empty());
  const std::set<double> allowed = {1, 2, 4, 8, 16, 32};
  double prev = 0.0;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    EXPECT_EQ(rec.iter, static_cast<int>(i) + 1);
    EXPECT_TRUE(allowed.count(rec.beta)) << rec.beta;
    EXPECT_GE(rec.beta, prev);
    prev = rec.beta;
    EXPECT_EQ(rec.factorizations, static_cast<long>(i) + 1);
    if (i > 0) {
      EXPECT_LE(rec.max_drho, 0.25 + 1e-12);
    }
  }
  EXPECT_LT(r.records.back().Q, r.records.front().Q);
  EXPECT_EQ(r.records[1].beta, 2.0);
}

TEST(Optimize, SkippingFirstPeriodicDoubling) {
  const auto& s = small();
  OptConfig cfg;
  cfg.I_max = 3;
  cfg.periodic_doubling_at_first = false;
  const OptimizationResult r = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  EXPECT_EQ(r.records[1].beta, 1.0);
}

TEST(Optimize, QrefModesShareTheFirstUpdate) {
  const auto& s = small();
  OptConfig cfg;
  cfg.I_max = 4;
  const OptimizationResult a = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  cfg.qref = QrefMode::PerIteration;
  const OptimizationResult b = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  EXPECT_EQ(a.Qref, b.Qref);
  EXPECT_EQ(a.records[1].Q, b.records[1].Q);
  EXPECT_NE(a.records[3].Q, b.records[3].Q);
}

TEST(Optimize, DeterministicRerun) {
  const auto& s = small();
  OptConfig cfg;
  cfg.I_max = 15;
  cfg.seed.mode = SeedMode::Random;
  cfg.seed.seed = 3;
  const OptimizationResult a = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  const OptimizationResult b = optimize(cfg, s.mesh, s.basis, s.ops, s.feeds);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].Q, b.records[i].Q);
  EXPECT_EQ(a.design.rho_bar, b.design.rho_bar);
}

TEST(GradientCheck, SmallPlateAdjointMatchesFiniteDifference) {
  const auto& s = small();
  ASSERT_EQ(s.mesh.triangle_count(), 24u);
  OptConfig cfg;
  cfg.seed.mode = SeedMode::Random;
  cfg.seed.seed = 1;
  DesignField d = seed_design(cfg, s.mesh, feed_triangles(s.mesh, s.feeds));
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (!d.is_fixed(t)) d.rho[t] = 0.2 + 0.6 * d.rho[t];
  const GradientCheck g = gradient_check(s.mesh, s.ops, d, 0.15 * s.mesh.a, {2.0, 0.5}, {});
  EXPECT_LE(g.max_rel_error, 1e-4) << "worst triangle " << g.worst;
}

TEST(Feeds, PlateFeedSitsOneCellFromTheLeftEdge) {
  const auto& s = medium();
  ASSERT_EQ(s.feeds.edges.size(), 1u);
  const Vec3 mid = s.mesh.edge_midpoint(s.feeds.edges[0]);
  EXPECT_NEAR(mid.x(), -0.5 + 1.0 / 6, 1e-12);
  EXPECT_NEAR(mid.y(), 0.5 * 0.6 / 4, 1e-12);
}

TEST(Feeds, SphereFeedsAreSymmetric) {
  const TriMesh m = generate_sphere(2, 1.0);
  const BasisSet b = build_rwg(m);
  const FeedSpec f = sphere_feeds(m, b, 1.0);
  ASSERT_EQ(f.edges.size(), 2u);
  const Vec3 m1 = m.edge_midpoint(f.edges[0]), m2 = m.edge_midpoint(f.edges[1]);
  EXPECT_LT((m1 + m2).norm(), 1e-9);
  EXPECT_NEAR(std::abs(m1.z()), 0.0, 1e-9);
}
