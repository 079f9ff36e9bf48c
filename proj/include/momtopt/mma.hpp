#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace momtopt {

/// Method of Moving Asymptotes for
///   min f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
///   s.t. f_i(x) - a_i z - y_i <= 0,  xmin <= x <= xmax,  y >= 0, z >= 0.
/// With f0 = 0 and a_i = 1 for the objective constraints this is the bound
/// formulation: minimize z subject to z >= f_i(x). The y_i are elastic slacks
/// that keep every subproblem feasible.
struct MmaSettings {
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double move = 0.25;
  double epsimin = 1e-10;
  double a0 = 1.0;
};

struct SubproblemResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double z = 0.0;
  Eigen::VectorXd lam;
  Eigen::VectorXd xsi;
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  double zet = 0.0;
  Eigen::VectorXd s;
  /// Constraint i active in the subproblem (multiplier bounded away from zero).
  std::vector<char> active;
  /// Max-norm of the unperturbed subproblem KKT conditions at the returned point.
  double kkt_residual = 0.0;
  /// Largest elastic slack; > 0 means an approximated constraint could not be met.
  double max_slack = 0.0;
  int newton_iterations = 0;
};

class Mma {
 public:
  Mma(Eigen::VectorXd xmin, Eigen::VectorXd xmax, Eigen::VectorXd a, Eigen::VectorXd c, Eigen::VectorXd d,
      MmaSettings settings = {})
      : xmin_(std::move(xmin)), xmax_(std::move(xmax)), a_(std::move(a)), c_(std::move(c)), d_(std::move(d)),
        set_(settings) {
    const auto n = xmin_.size();
    const auto m = a_.size();
    if (n == 0 || xmax_.size() != n) throw std::invalid_argument("mma: bound vectors must be non-empty and equal length");
    if (m == 0 || c_.size() != m || d_.size() != m) throw std::invalid_argument("mma: a, c, d must have one entry per constraint");
    if (!((xmax_ - xmin_).array() > 0.0).all()) throw std::invalid_argument("mma: xmax must exceed xmin");
    if (!(set_.move > 0.0 && set_.move <= 1.0)) throw std::invalid_argument("mma: move limit must be in (0, 1]");
    if (!(set_.asyinit > 0.0) || !(set_.asyincr >= 1.0) || !(set_.asydecr > 0.0 && set_.asydecr <= 1.0))
      throw std::invalid_argument("mma: invalid asymptote adaptation constants");
    reset();
  }

  Eigen::Index n() const { return xmin_.size(); }
  Eigen::Index m() const { return a_.size(); }
  int iteration() const { return iter_; }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& upp() const { return upp_; }
  const MmaSettings& settings() const { return set_; }

  void reset() {
    iter_ = 0;
    low_ = xmin_;
    upp_ = xmax_;
    xold1_ = Eigen::VectorXd();
    xold2_ = Eigen::VectorXd();
  }

  /// One outer MMA step from x. `dfdx` is m x n.
  SubproblemResult update(const Eigen::VectorXd& x, double f0val, const Eigen::VectorXd& df0dx,
                          const Eigen::VectorXd& fval, const Eigen::MatrixXd& dfdx) {
    const auto n = this->n();
    const auto m = this->m();
    if (x.size() != n || df0dx.size() != n || fval.size() != m || dfdx.rows() != m || dfdx.cols() != n)
      throw std::invalid_argument("mma: dimension mismatch in update");
    if (!x.allFinite() || !std::isfinite(f0val) || !fval.allFinite())
      throw std::invalid_argument("mma: non-finite function value");
    if (!df0dx.allFinite() || !dfdx.allFinite()) throw std::invalid_argument("mma: non-finite gradient");
    if ((x.array() < xmin_.array()).any() || (x.array() > xmax_.array()).any())
      throw std::invalid_argument("mma: iterate outside the box");
    ++iter_;

    const Eigen::ArrayXd range = (xmax_ - xmin_).array();
    Eigen::ArrayXd low, upp;
    if (iter_ <= 2) {
      low = x.array() - set_.asyinit * range;
      upp = x.array() + set_.asyinit * range;
    } else {
      const Eigen::ArrayXd zzz = (x - xold1_).array() * (xold1_ - xold2_).array();
      Eigen::ArrayXd factor = Eigen::ArrayXd::Ones(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (zzz[j] > 0.0) factor[j] = set_.asyincr;
        else if (zzz[j] < 0.0) factor[j] = set_.asydecr;
      }
      low = x.array() - factor * (xold1_ - low_).array();
      upp = x.array() + factor * (upp_ - xold1_).array();
      low = low.max(x.array() - 10.0 * range).min(x.array() - 0.01 * range);
      upp = upp.min(x.array() + 10.0 * range).max(x.array() + 0.01 * range);
    }

    const Eigen::ArrayXd alfa =
        (low + set_.albefa * (x.array() - low)).max(x.array() - set_.move * range).max(xmin_.array());
    const Eigen::ArrayXd beta =
        (upp - set_.albefa * (upp - x.array())).min(x.array() + set_.move * range).min(xmax_.array());

    const Eigen::ArrayXd xmamiinv = 1.0 / range.max(1e-5);
    const Eigen::ArrayXd ux2 = (upp - x.array()).square();
    const Eigen::ArrayXd xl2 = (x.array() - low).square();
    const Eigen::ArrayXd uxinv = 1.0 / (upp - x.array());
    const Eigen::ArrayXd xlinv = 1.0 / (x.array() - low);

    Eigen::ArrayXd p0 = df0dx.array().max(0.0);
    Eigen::ArrayXd q0 = (-df0dx.array()).max(0.0);
    const Eigen::ArrayXd pq0 = 0.001 * (p0 + q0) + set_.raa0 * xmamiinv;
    p0 = (p0 + pq0) * ux2;
    q0 = (q0 + pq0) * xl2;

    Eigen::MatrixXd P = dfdx.cwiseMax(0.0);
    Eigen::MatrixXd Q = (-dfdx).cwiseMax(0.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::ArrayXd pq = 0.001 * (P.row(i).array() + Q.row(i).array()).transpose() + set_.raa0 * xmamiinv;
      P.row(i) = ((P.row(i).array().transpose() + pq) * ux2).transpose();
      Q.row(i) = ((Q.row(i).array().transpose() + pq) * xl2).transpose();
    }
    const Eigen::VectorXd b = P * uxinv.matrix() + Q * xlinv.matrix() - fval;

    Subproblem sp{low, upp, alfa, beta, p0, q0, P, Q, b, set_.a0, a_, c_, d_};
    SubproblemResult r = solve_subproblem(sp, set_.epsimin);

    xold2_ = xold1_;
    xold1_ = x;
    low_ = low.matrix();
    upp_ = upp.matrix();
    if (xold2_.size() == 0) xold2_ = x;
    return r;
  }

 private:
  struct Subproblem {
    Eigen::ArrayXd low, upp, alfa, beta, p0, q0;
    Eigen::MatrixXd P, Q;
    Eigen::VectorXd b;
    double a0;
    Eigen::VectorXd a, c, d;
  };

  struct Point {
    Eigen::VectorXd x, y;
    double z;
    Eigen::VectorXd lam, xsi, eta, mu;
    double zet;
    Eigen::VectorXd s;
  };

  static Eigen::VectorXd residual(const Subproblem& sp, const Point& p, double epsi) {
    const auto n = p.x.size();
    const auto m = p.y.size();
    const Eigen::ArrayXd ux1 = sp.upp - p.x.array();
    const Eigen::ArrayXd xl1 = p.x.array() - sp.low;
    const Eigen::VectorXd plam = sp.p0.matrix() + sp.P.transpose() * p.lam;
    const Eigen::VectorXd qlam = sp.q0.matrix() + sp.Q.transpose() * p.lam;
    const Eigen::VectorXd gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
    const Eigen::ArrayXd dpsidx = plam.array() / ux1.square() - qlam.array() / xl1.square();

    Eigen::VectorXd res(3 * n + 4 * m + 2);
    Eigen::Index o = 0;
    res.segment(o, n) = (dpsidx - p.xsi.array() + p.eta.array()).matrix(); o += n;
    res.segment(o, m) = sp.c + sp.d.cwiseProduct(p.y) - p.mu - p.lam; o += m;
    res[o++] = sp.a0 - p.zet - sp.a.dot(p.lam);
    res.segment(o, m) = gvec - sp.a * p.z - p.y + p.s - sp.b; o += m;
    res.segment(o, n) = (p.xsi.array() * (p.x.array() - sp.alfa) - epsi).matrix(); o += n;
    res.segment(o, n) = (p.eta.array() * (sp.beta - p.x.array()) - epsi).matrix(); o += n;
    res.segment(o, m) = (p.mu.array() * p.y.array() - epsi).matrix(); o += m;
    res[o++] = p.zet * p.z - epsi;
    res.segment(o, m) = (p.lam.array() * p.s.array() - epsi).matrix();
    return res;
  }

  static SubproblemResult solve_subproblem(const Subproblem& sp, double epsimin) {
    const auto n = sp.p0.size();
    const auto m = sp.b.size();
    const Eigen::VectorXd een = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd eem = Eigen::VectorXd::Ones(m);

    Point p;
    p.x = (0.5 * (sp.alfa + sp.beta)).matrix();
    p.y = eem;
    p.z = 1.0;
    p.lam = eem;
    p.xsi = (1.0 / (p.x.array() - sp.alfa)).max(1.0).matrix();
    p.eta = (1.0 / (sp.beta - p.x.array())).max(1.0).matrix();
    p.mu = (0.5 * sp.c.array()).max(1.0).matrix();
    p.zet = 1.0;
    p.s = eem;

    int total_iters = 0;
    double epsi = 1.0;
    while (epsi > epsimin) {
      Eigen::VectorXd res = residual(sp, p, epsi);
      double resnorm = res.norm();
      double resmax = res.cwiseAbs().maxCoeff();
      int ittt = 0;
      while (resmax > 0.9 * epsi && ittt < 200) {
        ++ittt;
        ++total_iters;
        const Eigen::ArrayXd ux1 = sp.upp - p.x.array();
        const Eigen::ArrayXd xl1 = p.x.array() - sp.low;
        const Eigen::ArrayXd ux2 = ux1.square();
        const Eigen::ArrayXd xl2 = xl1.square();
        const Eigen::ArrayXd ux3 = ux1 * ux2;
        const Eigen::ArrayXd xl3 = xl1 * xl2;
        const Eigen::VectorXd plam = sp.p0.matrix() + sp.P.transpose() * p.lam;
        const Eigen::VectorXd qlam = sp.q0.matrix() + sp.Q.transpose() * p.lam;
        const Eigen::VectorXd gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
        const Eigen::MatrixXd GG =
            sp.P * (1.0 / ux2).matrix().asDiagonal() - sp.Q * (1.0 / xl2).matrix().asDiagonal();
        const Eigen::ArrayXd dpsidx = plam.array() / ux2 - qlam.array() / xl2;
        const Eigen::ArrayXd xa = p.x.array() - sp.alfa;
        const Eigen::ArrayXd bx = sp.beta - p.x.array();

        const Eigen::ArrayXd delx = dpsidx - epsi / xa + epsi / bx;
        const Eigen::ArrayXd dely = sp.c.array() + sp.d.array() * p.y.array() - p.lam.array() - epsi / p.y.array();
        const double delz = sp.a0 - sp.a.dot(p.lam) - epsi / p.z;
        const Eigen::ArrayXd dellam =
            gvec.array() - sp.a.array() * p.z - p.y.array() - sp.b.array() + epsi / p.lam.array();
        const Eigen::ArrayXd diagx =
            2.0 * (plam.array() / ux3 + qlam.array() / xl3) + p.xsi.array() / xa + p.eta.array() / bx;
        const Eigen::ArrayXd diagy = sp.d.array() + p.mu.array() / p.y.array();
        const Eigen::ArrayXd diaglam = p.s.array() / p.lam.array();
        const Eigen::ArrayXd diaglamyi = diaglam + 1.0 / diagy;

        Eigen::VectorXd dx, dlam;
        double dz = 0.0;
        if (m < n) {
          const Eigen::VectorXd blam = (dellam + dely / diagy).matrix() - GG * (delx / diagx).matrix();
          Eigen::MatrixXd AA(m + 1, m + 1);
          AA.topLeftCorner(m, m) = GG * (1.0 / diagx).matrix().asDiagonal() * GG.transpose();
          AA.topLeftCorner(m, m).diagonal() += diaglamyi.matrix();
          AA.topRightCorner(m, 1) = sp.a;
          AA.bottomLeftCorner(1, m) = sp.a.transpose();
          AA(m, m) = -p.zet / p.z;
          Eigen::VectorXd bb(m + 1);
          bb.head(m) = blam;
          bb[m] = delz;
          const Eigen::VectorXd sol = AA.partialPivLu().solve(bb);
          dlam = sol.head(m);
          dz = sol[m];
          dx = (-delx / diagx).matrix() - ((GG.transpose() * dlam).array() / diagx).matrix();
        } else {
          const Eigen::ArrayXd dellamyi = dellam + dely / diagy;
          Eigen::MatrixXd AA(n + 1, n + 1);
          AA.topLeftCorner(n, n) = GG.transpose() * (1.0 / diaglamyi).matrix().asDiagonal() * GG;
          AA.topLeftCorner(n, n).diagonal() += diagx.matrix();
          const Eigen::VectorXd axz = -GG.transpose() * (sp.a.array() / diaglamyi).matrix();
          AA.topRightCorner(n, 1) = axz;
          AA.bottomLeftCorner(1, n) = axz.transpose();
          AA(n, n) = p.zet / p.z + sp.a.dot((sp.a.array() / diaglamyi).matrix());
          Eigen::VectorXd bb(n + 1);
          bb.head(n) = -(delx.matrix() + GG.transpose() * (dellamyi / diaglamyi).matrix());
          bb[n] = -(delz - sp.a.dot((dellamyi / diaglamyi).matrix()));
          const Eigen::VectorXd sol = AA.partialPivLu().solve(bb);
          dx = sol.head(n);
          dz = sol[n];
          dlam = ((GG * dx).array() / diaglamyi - dz * (sp.a.array() / diaglamyi) + dellamyi / diaglamyi).matrix();
        }

        const Eigen::VectorXd dy = ((-dely + dlam.array()) / diagy).matrix();
        const Eigen::VectorXd dxsi = (-p.xsi.array() + epsi / xa - p.xsi.array() * dx.array() / xa).matrix();
        const Eigen::VectorXd deta = (-p.eta.array() + epsi / bx + p.eta.array() * dx.array() / bx).matrix();
        const Eigen::VectorXd dmu = (-p.mu.array() + epsi / p.y.array() - p.mu.array() * dy.array() / p.y.array()).matrix();
        const double dzet = -p.zet + epsi / p.z - p.zet * dz / p.z;
        const Eigen::VectorXd ds = (-p.s.array() + epsi / p.lam.array() - p.s.array() * dlam.array() / p.lam.array()).matrix();

        double stm = 1.0;
        auto bound_step = [&stm](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
          for (Eigen::Index i = 0; i < v.size(); ++i) stm = std::max(stm, -1.01 * dv[i] / v[i]);
        };
        bound_step(p.y, dy);
        stm = std::max(stm, -1.01 * dz / p.z);
        bound_step(p.lam, dlam);
        bound_step(p.xsi, dxsi);
        bound_step(p.eta, deta);
        bound_step(p.mu, dmu);
        stm = std::max(stm, -1.01 * dzet / p.zet);
        bound_step(p.s, ds);
        for (Eigen::Index j = 0; j < n; ++j) {
          stm = std::max(stm, -1.01 * dx[j] / xa[j]);
          stm = std::max(stm, 1.01 * dx[j] / bx[j]);
        }
        double steg = 1.0 / stm;

        const Point old = p;
        int itto = 0;
        double resinew = 2.0 * resnorm;
        while (resinew > resnorm && itto < 50) {
          ++itto;
          p.x = old.x + steg * dx;
          p.y = old.y + steg * dy;
          p.z = old.z + steg * dz;
          p.lam = old.lam + steg * dlam;
          p.xsi = old.xsi + steg * dxsi;
          p.eta = old.eta + steg * deta;
          p.mu = old.mu + steg * dmu;
          p.zet = old.zet + steg * dzet;
          p.s = old.s + steg * ds;
          res = residual(sp, p, epsi);
          resinew = res.norm();
          steg *= 0.5;
        }
        resnorm = resinew;
        resmax = res.cwiseAbs().maxCoeff();
      }
      epsi *= 0.1;
    }

    SubproblemResult r;
    r.x = p.x.cwiseMax(sp.alfa.matrix()).cwiseMin(sp.beta.matrix());
    r.y = p.y;
    r.z = p.z;
    r.lam = p.lam;
    r.xsi = p.xsi;
    r.eta = p.eta;
    r.mu = p.mu;
    r.zet = p.zet;
    r.s = p.s;
    r.kkt_residual = residual(sp, p, 0.0).cwiseAbs().maxCoeff();
    r.max_slack = p.y.maxCoeff();
    r.active.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) r.active[static_cast<std::size_t>(i)] = p.lam[i] > 1e-6 ? 1 : 0;
    r.newton_iterations = total_iters;
    return r;
  }

  Eigen::VectorXd xmin_, xmax_, a_, c_, d_;
  MmaSettings set_;
  int iter_ = 0;
  Eigen::VectorXd low_, upp_, xold1_, xold2_;
};

}  // namespace momtopt
