#include <gtest/gtest.h>

#include "momtopt/mma.hpp"

using namespace momtopt;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(Mma, OneVariableBoundFormulation) {
  Mma mma(vec({0.0}), vec({1.0}), vec({1.0}), vec({1000.0}), vec({1.0}));
  Eigen::VectorXd x = vec({0.9});
  for (int it = 0; it < 30; ++it) {
    const double g = (x[0] - 0.3) * (x[0] - 0.3);
    Eigen::MatrixXd dg(1, 1);
    dg(0, 0) = 2.0 * (x[0] - 0.3);
    const SubproblemResult r = mma.update(x, 0.0, vec({0.0}), vec({g}), dg);
    EXPECT_LE(r.kkt_residual, 1e-9);
    x = r.x;
  }
  EXPECT_NEAR(x[0], 0.3, 1e-4);
}

TEST(Mma, FiveVariableKktPoint) {
  // min z s.t. z >= sum (x_i - c_i)^2, sum x_i <= 2, 0 <= x <= 1.
  // Projection of c onto the half-space: x* = c - 0.3.
  const Eigen::VectorXd c = vec({0.9, 0.8, 0.7, 0.6, 0.5});
  const Eigen::VectorXd expect = c.array() - 0.3;
  Mma mma(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5), vec({1.0, 0.0}), vec({1000.0, 1000.0}), vec({1.0, 1.0}));
  Eigen::VectorXd x = Eigen::VectorXd::Constant(5, 0.1);
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXd f(2);
    f << (x - c).squaredNorm(), x.sum() - 2.0;
    Eigen::MatrixXd df(2, 5);
    df.row(0) = (2.0 * (x - c)).transpose();
    df.row(1).setOnes();
    const SubproblemResult r = mma.update(x, 0.0, Eigen::VectorXd::Zero(5), f, df);
    const double step = (r.x - x).cwiseAbs().maxCoeff();
    x = r.x;
    if (step < 1e-8) break;
  }
  EXPECT_LT((x - expect).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE(x.sum(), 2.0 + 1e-6);
}

TEST(Mma, MoveLimitAndAsymptotesInvariant) {
  const int n = 8;
  Mma mma(Eigen::VectorXd::Constant(n, -1.0), Eigen::VectorXd::Constant(n, 3.0), vec({1.0}), vec({1000.0}), vec({1.0}));
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -0.9, 2.9);
  for (int it = 0; it < 40; ++it) {
    // oscillating, steep objective to stress the asymptote heuristics
    const Eigen::VectorXd target = Eigen::VectorXd::Constant(n, it % 2 ? -1.0 : 3.0);
    Eigen::MatrixXd df(1, n);
    df.row(0) = (4.0 * (x - target)).transpose();
    const SubproblemResult r = mma.update(x, 0.0, Eigen::VectorXd::Zero(n), vec({2.0 * (x - target).squaredNorm()}), df);
    EXPECT_LE((r.x - x).cwiseAbs().maxCoeff(), 0.25 * 4.0 + 1e-12);
    EXPECT_TRUE((mma.low().array() < x.array()).all());
    EXPECT_TRUE((mma.upp().array() > x.array()).all());
    EXPECT_TRUE(mma.low().allFinite() && mma.upp().allFinite());
    EXPECT_TRUE((r.x.array() >= -1.0).all() && (r.x.array() <= 3.0).all());
    x = r.x;
  }
}

TEST(Mma, InitialAsymptoteSpreadAfterReset) {
  Mma mma(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 2.0), vec({1.0}), vec({1000.0}), vec({1.0}));
  const Eigen::VectorXd x = vec({0.5, 1.5});
  Eigen::MatrixXd df(1, 2);
  df << 1.0, -1.0;
  for (int it = 0; it < 4; ++it) mma.update(x, 0.0, Eigen::VectorXd::Zero(2), vec({0.1}), df);
  mma.reset();
  mma.reset();
  mma.update(x, 0.0, Eigen::VectorXd::Zero(2), vec({0.1}), df);
  EXPECT_EQ(mma.iteration(), 1);
  EXPECT_DOUBLE_EQ(mma.low()[0], 0.5 - 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(mma.upp()[1], 1.5 + 0.5 * 2.0);
}

TEST(Mma, RunResetRunIsBitwiseIdentical) {
  auto run = [](Mma& mma) {
    Eigen::VectorXd x = vec({0.2, 0.8, 0.5});
    for (int it = 0; it < 15; ++it) {
      Eigen::MatrixXd df(1, 3);
      df.row(0) = (2.0 * (x.array() - 0.4)).matrix().transpose();
      x = mma.update(x, 0.0, Eigen::VectorXd::Zero(3), vec({(x.array() - 0.4).square().sum()}), df).x;
    }
    return x;
  };
  Mma mma(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), vec({1.0}), vec({1000.0}), vec({1.0}));
  const Eigen::VectorXd a = run(mma);
  mma.reset();
  const Eigen::VectorXd b = run(mma);
  EXPECT_EQ(a, b);
}

TEST(Mma, InfeasibleConstraintUsesElasticSlack) {
  // x <= -1 cannot be met on [0, 1]; the subproblem must still return.
  Mma mma(vec({0.0}), vec({1.0}), vec({0.0}), vec({1000.0}), vec({1.0}));
  Eigen::MatrixXd df(1, 1);
  df(0, 0) = 1.0;
  const SubproblemResult r = mma.update(vec({0.5}), 0.0, vec({0.0}), vec({0.5 + 1.0}), df);
  EXPECT_GT(r.max_slack, 0.1);
  EXPECT_LT(r.x[0], 0.5);
}

TEST(Mma, NonFiniteGradientRejected) {
  Mma mma(vec({0.0}), vec({1.0}), vec({1.0}), vec({1000.0}), vec({1.0}));
  Eigen::MatrixXd df(1, 1);
  df(0, 0) = std::nan("");
  EXPECT_THROW(mma.update(vec({0.5}), 0.0, vec({0.0}), vec({0.1}), df), std::invalid_argument);
}

TEST(Mma, ApproximatedConstraintsSatisfied) {
  Mma mma(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), vec({1.0, 0.0}), vec({1000.0, 1000.0}), vec({1.0, 1.0}));
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.5);
  Eigen::MatrixXd df(2, 4);
  df << 1.0, -2.0, 0.5, 0.0, 1.0, 1.0, 1.0, 1.0;
  const SubproblemResult r = mma.update(x, 0.0, Eigen::VectorXd::Zero(4), vec({0.3, 0.1}), df);
  EXPECT_LE(r.kkt_residual, 1e-9);
  EXPECT_LT(r.max_slack, 1e-6);
  EXPECT_LE((r.x - x).cwiseAbs().maxCoeff(), 0.25 + 1e-12);
}
