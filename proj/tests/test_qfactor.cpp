#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "momtopt/qfactor.hpp"
#include "momtopt/topopt.hpp"

using namespace momtopt;

namespace {

struct SmallPlate {
  TriMesh mesh = generate_plate(1.0, 0.6, 3, 2);
  BasisSet basis = build_rwg(mesh);
  FeedSpec feeds = plate_feed(mesh, basis, 1.0, 0.6, 3, 2);
  OperatorSet ops = build_operators(mesh, basis, 0.8 / mesh.a, feeds);
};

const SmallPlate& plate() {
  static const SmallPlate p;
  return p;
}

std::vector<double> random_density(std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.2, 0.9);
  std::vector<double> r(T);
  for (auto& x : r) x = U(rng);
  return r;
}

}  // namespace

TEST(QFactors, SingleFactorizationPerAnalysis) {
  const auto& p = plate();
  const auto rho = random_density(p.mesh.triangle_count(), 1);
  const long before = factorization_counter().load();
  const GrayAnalysis g = analyze_gray(p.ops, rho, {});
  EXPECT_EQ(factorization_counter().load() - before, 1);
  EXPECT_GT(g.q.Q, 0.0);
  EXPECT_LE(g.state.residual, 1e-10);
}

TEST(QFactors, DefinitionsAgree) {
  const auto& p = plate();
  const auto rho = random_density(p.mesh.triangle_count(), 2);
  const GrayAnalysis g = analyze_gray(p.ops, rho, {}, false);
  EXPECT_DOUBLE_EQ(g.q.Q, std::max(g.q.Qe, g.q.Qm));
  EXPECT_NEAR(g.q.Qe, 2.0 * p.ops.omega * g.q.We / g.q.Prad, 1e-10 * g.q.Qe);
  EXPECT_NEAR(g.q.Qm, 2.0 * p.ops.omega * g.q.Wm / g.q.Prad, 1e-10 * g.q.Qm);
}

TEST(QFactors, InvariantUnderCurrentScaling) {
  const auto& p = plate();
  const auto rho = random_density(p.mesh.triangle_count(), 3);
  const GrayAnalysis g = analyze_gray(p.ops, rho, {}, false);
  const QFactors q2 = q_factors(g.state.I * cplx(3.0, -2.0), p.ops);
  EXPECT_NEAR(q2.Qe, g.q.Qe, 1e-10 * g.q.Qe);
  EXPECT_NEAR(q2.Qm, g.q.Qm, 1e-10 * g.q.Qm);
}

// Oracle: central differences in the projected densities (step 1e-5).
TEST(Adjoint, SensitivitiesMatchFiniteDifferences) {
  const auto& p = plate();
  const InterpolationSpec spec;
  auto rho = random_density(p.mesh.triangle_count(), 4);
  const GrayAnalysis g = analyze_gray(p.ops, rho, spec);
  const double h = 1e-5;
  for (std::size_t t = 0; t < rho.size(); ++t) {
    auto rp = rho, rm = rho;
    rp[t] += h;
    rm[t] -= h;
    const QFactors qp = analyze_gray(p.ops, rp, spec, false).q;
    const QFactors qm = analyze_gray(p.ops, rm, spec, false).q;
    const double fe = (qp.Qe - qm.Qe) / (2 * h), fm = (qp.Qm - qm.Qm) / (2 * h);
    EXPECT_NEAR(g.dQe_drho_bar[static_cast<Eigen::Index>(t)], fe, 1e-5 * std::abs(fe)) << "t=" << t;
    EXPECT_NEAR(g.dQm_drho_bar[static_cast<Eigen::Index>(t)], fm, 1e-5 * std::abs(fm)) << "t=" << t;
  }
}

TEST(Adjoint, TransposeSolveForNonSymmetricSystem) {
  const MatrixXcd Z = MatrixXcd::Random(6, 6) + 4.0 * MatrixXcd::Identity(6, 6);
  const VectorXcd V = VectorXcd::Random(6);
  const StateSolution st = solve_state(Z, V);
  EXPECT_FALSE(st.symmetric);
  const VectorXcd rhs = VectorXcd::Random(6);
  const VectorXcd lam = solve_adjoint(st, rhs);
  EXPECT_LT((Z.transpose() * lam - rhs).norm(), 1e-12);
}

TEST(Solver, SingularSystemIsSolverError) {
  MatrixXcd Z = MatrixXcd::Identity(4, 4);
  Z(3, 3) = 0.0;
  EXPECT_THROW(solve_state(Z, VectorXcd::Ones(4)), SolverError);
}

TEST(Solver, ZeroExcitationRejected) {
  EXPECT_THROW(solve_state(MatrixXcd::Identity(3, 3), VectorXcd::Zero(3)), std::invalid_argument);
}

TEST(Threshold, AllMetalReducedBasisEqualsPecAnalysis) {
  const auto& p = plate();
  const std::vector<char> metal(p.mesh.triangle_count(), 1);
  const ThresholdResult thr = thresholded_analysis(p.mesh, p.basis, metal, p.feeds, p.ops.k);
  const QFactors pec = q_factors(solve_state(p.ops.Z0, p.ops.V).I, p.ops);
  EXPECT_EQ(thr.kept.size(), p.basis.N());
  EXPECT_NEAR(thr.q.Qe, pec.Qe, 1e-9 * pec.Qe);
  EXPECT_NEAR(thr.q.Qm, pec.Qm, 1e-9 * pec.Qm);
}

TEST(Threshold, FeedIsolationReported) {
  const auto& p = plate();
  std::vector<char> metal(p.mesh.triangle_count(), 1);
  const auto ft = feed_triangles(p.mesh, p.feeds);
  metal[static_cast<std::size_t>(ft[0])] = 0;
  EXPECT_THROW(thresholded_analysis(p.mesh, p.basis, metal, p.feeds, p.ops.k), FeedIsolatedError);
}

TEST(Threshold, ReducedBasisDropsFunctionsTouchingVoid) {
  const auto& p = plate();
  std::vector<char> metal(p.mesh.triangle_count(), 1);
  metal[0] = 0;
  for (int n : metal_basis_indices(p.basis, metal)) {
    EXPECT_NE(p.basis.functions[n].tri_plus, 0);
    EXPECT_NE(p.basis.functions[n].tri_minus, 0);
  }
}

TEST(Sweep, SinglePointMatchesDirectAnalysis) {
  const auto& p = plate();
  const auto rho = random_density(p.mesh.triangle_count(), 6);
  const Eigen::VectorXd rb = Eigen::Map<const Eigen::VectorXd>(rho.data(), static_cast<Eigen::Index>(rho.size()));
  const double ka[] = {0.8};
  const auto rows = frequency_sweep(p.mesh, p.basis, rb, SweepMode::Gray, ka, p.feeds);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_TRUE(rows[0].ok);
  const QFactors direct = analyze_gray(p.ops, rho, {}, false).q;
  EXPECT_NEAR(rows[0].q.Q, direct.Q, 1e-12 * direct.Q);
}

TEST(Sweep, CsvFormat) {
  SweepRow a;
  a.ka = 0.8;
  a.ok = true;
  a.q.Qe = 10.0;
  a.q.Qm = 10.2;
  a.q.Q = 10.2;
  SweepRow b;
  b.ka = 0.9;
  std::ostringstream os;
  const SweepRow rows[] = {a, b};
  write_sweep_csv(os, rows);
  EXPECT_EQ(os.str(), "ka,Qe,Qm,Q,selfres\n0.8,10,10.2,10.2,1\n0.9,nan,nan,nan,0\n");
}

TEST(Sweep, RejectsBadKaLists) {
  const auto& p = plate();
  const Eigen::VectorXd rb = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p.mesh.triangle_count()));
  const std::vector<double> empty, unsorted = {0.9, 0.8};
  EXPECT_THROW(frequency_sweep(p.mesh, p.basis, rb, SweepMode::Gray, empty, p.feeds), std::invalid_argument);
  EXPECT_THROW(frequency_sweep(p.mesh, p.basis, rb, SweepMode::Gray, unsorted, p.feeds), std::invalid_argument);
}

TEST(SelfResonance, Threshold) {
  QFactors q;
  q.Qe = 100.0;
  q.Qm = 96.0;
  q.Q = 100.0;
  EXPECT_TRUE(self_resonant(q));
  q.Qm = 94.0;
  EXPECT_FALSE(self_resonant(q));
}
