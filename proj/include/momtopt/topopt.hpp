#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "em_operators.hpp"
#include "filters.hpp"
#include "material_model.hpp"
#include "mesh.hpp"
#include "mma.hpp"
#include "qfactor.hpp"

namespace momtopt {

enum class SeedMode { Uniform, UniformValue, Random, FromFile };

struct SeedSpec {
  SeedMode mode = SeedMode::Uniform;
  double value = 0.0;  // UniformValue
  std::uint64_t seed = 0;  // Random
  Eigen::VectorXd values;  // FromFile, one entry per triangle
};

/// Which Q scales the Qe, Qm constraints handed to MMA: the initial Q, the Q at
/// the first iteration of each beta, or the current Q.
enum class QrefMode { Initial, PerBeta, PerIteration };

struct OptConfig {
  double ka = 0.8;
  double Sf = 0.35;
  /// Filter radius as a fraction of the circumscribing radius a.
  double Rmin = 0.15;
  int I_max = 600;
  double delta_rho_max = 0.01;
  double beta0 = 1.0;
  double beta_max = 32.0;
  double eta = 0.5;
  InterpolationSpec interpolation{};
  MmaSettings mma{};
  double mma_c = 1000.0;
  double mma_d = 1.0;
  SeedSpec seed{};
  int snapshot_stride = 50;
  /// Reinitialize the MMA asymptotes whenever beta doubles.
  bool reset_mma_on_beta = false;
  QrefMode qref = QrefMode::Initial;
  /// Allow the every-100-iterations doubling at i = 1 (mod(1, 100) = 1).
  bool periodic_doubling_at_first = true;

  void validate() const {
    if (!(ka > 0.0)) throw std::invalid_argument("ka must be > 0");
    if (!(Sf > 0.0 && Sf <= 1.0)) throw std::invalid_argument("area fraction Sf must be in (0, 1]");
    if (!(Rmin >= 0.0)) throw std::invalid_argument("filter radius Rmin must be >= 0");
    if (I_max < 1) throw std::invalid_argument("iteration cap I_max must be >= 1");
    if (!(delta_rho_max > 0.0)) throw std::invalid_argument("delta_rho_max must be > 0");
    if (!(beta0 > 0.0) || !(beta_max >= beta0)) throw std::invalid_argument("require 0 < beta0 <= beta_max");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must be in (0, 1)");
    if (snapshot_stride < 0) throw std::invalid_argument("snapshot stride must be >= 0");
    if (!(mma_c > 0.0) || !(mma_d >= 0.0)) throw std::invalid_argument("invalid MMA elastic penalties");
    interpolation.validate();
    if (seed.mode == SeedMode::UniformValue && !(seed.value >= 0.0 && seed.value <= 1.0))
      throw std::invalid_argument("uniform seed value must be in [0, 1]");
  }
};

struct IterationRecord {
  int iter = 0;
  double Qe = 0.0;
  double Qm = 0.0;
  double Q = 0.0;
  double beta = 0.0;
  /// max_t |rho^i - rho^(i-1)|; NaN at the first iteration.
  double max_drho = 0.0;
  double area_frac = 0.0;
  /// Bound variable after the update, in units of Q.
  double z = 0.0;
  long factorizations = 0;
};

enum class Termination { Converged, IterationCap };

inline const char* termination_name(Termination t) { return t == Termination::Converged ? "converged" : "iteration-cap"; }

struct OptimizationResult {
  std::vector<IterationRecord> records;
  DesignField design;
  std::vector<char> thresholded;
  bool thr_ok = false;
  QFactors thr_q{};
  std::string thr_error;
  bool feed_isolated = false;
  Termination reason = Termination::IterationCap;
  double Qref = 0.0;
};

struct OptCallbacks {
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(int, const DesignField&)> on_snapshot;
};

/// (1/A0) sum_t rho_bar_t A_t.
inline double area_fraction(const Eigen::VectorXd& rho_bar, std::span<const double> areas, double A0) {
  if (static_cast<std::size_t>(rho_bar.size()) != areas.size()) throw std::invalid_argument("area_fraction: length mismatch");
  if (!(A0 > 0.0)) throw std::invalid_argument("area_fraction: reference area must be > 0");
  double s = 0.0;
  for (std::size_t t = 0; t < areas.size(); ++t) s += rho_bar[static_cast<Eigen::Index>(t)] * areas[t];
  return s / A0;
}

inline DesignField seed_design(const OptConfig& cfg, const TriMesh& mesh, std::span<const int> pinned) {
  const auto T = static_cast<Eigen::Index>(mesh.triangle_count());
  DesignField d = make_design(T, cfg.Sf, pinned);
  switch (cfg.seed.mode) {
    case SeedMode::Uniform:
      break;
    case SeedMode::UniformValue:
      for (Eigen::Index t = 0; t < T; ++t)
        if (!d.is_fixed(t)) d.rho[t] = cfg.seed.value;
      break;
    case SeedMode::Random: {
      std::mt19937_64 rng(cfg.seed.seed);
      for (Eigen::Index t = 0; t < T; ++t) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (!d.is_fixed(t)) d.rho[t] = u;
      }
      break;
    }
    case SeedMode::FromFile:
      if (cfg.seed.values.size() != T)
        throw std::invalid_argument("seed design has " + std::to_string(cfg.seed.values.size()) + " entries, mesh has " +
                                    std::to_string(T) + " triangles");
      for (Eigen::Index t = 0; t < T; ++t) {
        const double v = cfg.seed.values[t];
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("seed design values must lie in [0, 1]");
        if (!d.is_fixed(t)) d.rho[t] = v;
      }
      break;
  }
  d.rho_tilde = d.rho;
  d.rho_bar = d.rho;
  return d;
}

namespace detail {

inline std::vector<Eigen::Index> free_indices(const DesignField& d) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (!d.is_fixed(t)) out.push_back(t);
  return out;
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace detail

/// Density-based Q minimization: filter, project, solve, adjoints, MMA update,
/// with beta continuation. `ops` must be assembled at k = ka / a with the feeds
/// in `feeds`; the triangles next to the feed edges are pinned to metal.
inline OptimizationResult optimize(const OptConfig& cfg, const TriMesh& mesh, const BasisSet& basis,
                                   const OperatorSet& ops, const FeedSpec& feeds, const OptCallbacks& cb = {},
                                   const OperatorOptions& op_opts = {}) {
  cfg.validate();
  const auto pinned = feed_triangles(mesh, feeds);
  const DensityFilter filter = build_density_filter(mesh, cfg.Rmin * mesh.a);
  OptimizationResult res;
  res.design = seed_design(cfg, mesh, pinned);
  DesignField& d = res.design;
  const auto free = detail::free_indices(d);
  if (free.empty()) throw std::invalid_argument("optimize: every triangle is pinned");
  const auto nfree = static_cast<Eigen::Index>(free.size());

  const double A0 = mesh.total_area();
  const Eigen::VectorXd dA = Eigen::Map<const Eigen::VectorXd>(mesh.areas.data(), static_cast<Eigen::Index>(mesh.areas.size())) / A0;

  const Eigen::Vector3d a_vec(1.0, 1.0, 0.0);
  Mma mma(Eigen::VectorXd::Zero(nfree), Eigen::VectorXd::Ones(nfree), a_vec, Eigen::Vector3d::Constant(cfg.mma_c),
          Eigen::Vector3d::Constant(cfg.mma_d), cfg.mma);

  ProjectionSpec proj{cfg.beta0, cfg.eta};
  Eigen::VectorXd rho_prev;
  bool just_doubled = false;
  double Qref = 0.0;
  const long fact0 = factorization_counter().load();

  for (int i = 1;; ++i) {
    update_physical(d, filter, proj);
    const GrayAnalysis g = analyze_gray(ops, detail::as_span(d.rho_bar), cfg.interpolation);
    if (i == 1) res.Qref = Qref = g.q.Q;
    if ((just_doubled && cfg.qref == QrefMode::PerBeta) || cfg.qref == QrefMode::PerIteration) Qref = g.q.Q;

    IterationRecord rec;
    rec.iter = i;
    rec.Qe = g.q.Qe;
    rec.Qm = g.q.Qm;
    rec.Q = g.q.Q;
    rec.beta = proj.beta;
    rec.max_drho = i == 1 ? std::numeric_limits<double>::quiet_NaN() : (d.rho - rho_prev).cwiseAbs().maxCoeff();
    rec.area_frac = area_fraction(d.rho_bar, mesh.areas, A0);

    // The change reaching this iteration came from an update made before a
    // doubling, so it says nothing about convergence at the new beta.
    const bool small_change = i > 1 && !just_doubled && rec.max_drho < cfg.delta_rho_max;
    const bool at_cap = i >= cfg.I_max;
    const bool converged = small_change && proj.beta >= cfg.beta_max;

    if (!at_cap && !converged) {
      const Eigen::VectorXd gQe = backpropagate(g.dQe_drho_bar, filter, d.rho_tilde, proj, d.fixed);
      const Eigen::VectorXd gQm = backpropagate(g.dQm_drho_bar, filter, d.rho_tilde, proj, d.fixed);
      const Eigen::VectorXd gA = backpropagate(dA, filter, d.rho_tilde, proj, d.fixed);
      Eigen::VectorXd x(nfree);
      Eigen::MatrixXd df(3, nfree);
      for (Eigen::Index j = 0; j < nfree; ++j) {
        const Eigen::Index t = free[static_cast<std::size_t>(j)];
        x[j] = d.rho[t];
        df(0, j) = gQe[t] / Qref;
        df(1, j) = gQm[t] / Qref;
        df(2, j) = gA[t];
      }
      const Eigen::Vector3d f(g.q.Qe / Qref, g.q.Qm / Qref, rec.area_frac - cfg.Sf);
      const SubproblemResult sub = mma.update(x, 0.0, Eigen::VectorXd::Zero(nfree), f, df);
      rec.z = sub.z * Qref;
      rho_prev = d.rho;
      for (Eigen::Index j = 0; j < nfree; ++j) d.rho[free[static_cast<std::size_t>(j)]] = sub.x[j];
    } else {
      rec.z = g.q.Q;
    }
    rec.factorizations = factorization_counter().load() - fact0;
    res.records.push_back(rec);
    if (cb.on_iteration) cb.on_iteration(rec);
    if (cb.on_snapshot && cfg.snapshot_stride > 0 && i % cfg.snapshot_stride == 0) cb.on_snapshot(i, d);

    if (at_cap) {
      res.reason = Termination::IterationCap;
      break;
    }
    if (converged) {
      res.reason = Termination::Converged;
      break;
    }
    const bool periodic = i % 100 == 1 && (i != 1 || cfg.periodic_doubling_at_first);
    just_doubled = false;
    if ((small_change || periodic) && proj.beta < cfg.beta_max) {
      proj.beta = std::min(2.0 * proj.beta, cfg.beta_max);
      just_doubled = true;
      if (cfg.reset_mma_on_beta) mma.reset();
    }
  }

  // Stopping happens before the update, so d still holds the last evaluated design.
  res.thresholded = hard_threshold(d.rho_bar, d.fixed, &d.pinned_value);
  try {
    const ThresholdResult thr = thresholded_analysis(mesh, basis, res.thresholded, feeds, ops.k, op_opts);
    res.thr_q = thr.q;
    res.thr_ok = true;
  } catch (const FeedIsolatedError& ex) {
    res.feed_isolated = true;
    res.thr_error = ex.what();
  } catch (const SolverError& ex) {
    res.thr_error = ex.what();
  }
  return res;
}

struct GradientCheck {
  Eigen::VectorXd adjoint_Qe, adjoint_Qm;
  Eigen::VectorXd fd_Qe, fd_Qm;
  double max_rel_error = 0.0;
  Eigen::Index worst = -1;
};

/// Adjoint gradients of Qe and Qm with respect to the design variables rho
/// (through filter and projection) against central differences of step h.
inline GradientCheck gradient_check(const TriMesh& mesh, const OperatorSet& ops, DesignField d, double Rmin_abs,
                                    const ProjectionSpec& proj, const InterpolationSpec& interp, double h = 1e-5) {
  const DensityFilter filter = build_density_filter(mesh, Rmin_abs);
  update_physical(d, filter, proj);
  const GrayAnalysis g = analyze_gray(ops, detail::as_span(d.rho_bar), interp);
  GradientCheck out;
  out.adjoint_Qe = backpropagate(g.dQe_drho_bar, filter, d.rho_tilde, proj, d.fixed);
  out.adjoint_Qm = backpropagate(g.dQm_drho_bar, filter, d.rho_tilde, proj, d.fixed);
  out.fd_Qe = Eigen::VectorXd::Zero(d.size());
  out.fd_Qm = Eigen::VectorXd::Zero(d.size());

  auto eval = [&](DesignField& f) {
    update_physical(f, filter, proj);
    return analyze_gray(ops, detail::as_span(f.rho_bar), interp, false).q;
  };
  for (Eigen::Index t = 0; t < d.size(); ++t) {
    if (d.is_fixed(t)) continue;
    DesignField p = d, m = d;
    p.rho[t] += h;
    m.rho[t] -= h;
    const QFactors qp = eval(p), qm = eval(m);
    out.fd_Qe[t] = (qp.Qe - qm.Qe) / (2.0 * h);
    out.fd_Qm[t] = (qp.Qm - qm.Qm) / (2.0 * h);
  }
  for (Eigen::Index t = 0; t < d.size(); ++t) {
    if (d.is_fixed(t)) continue;
    const double ee = std::abs(out.adjoint_Qe[t] - out.fd_Qe[t]) / std::max(std::abs(out.fd_Qe[t]), 1e-300);
    const double em = std::abs(out.adjoint_Qm[t] - out.fd_Qm[t]) / std::max(std::abs(out.fd_Qm[t]), 1e-300);
    const double e = std::max(ee, em);
    if (e > out.max_rel_error || out.worst < 0) {
      out.max_rel_error = e;
      out.worst = t;
    }
  }
  return out;
}

/// Delta-gap feed on a generated plate: the vertical cell edge one column in
/// from the left boundary, just above the plate's center line, driven along x.
inline FeedSpec plate_feed(const TriMesh& mesh, const BasisSet& basis, double L, double aspect, int nx, int ny,
                           cplx voltage = 1.0) {
  const double dx = L / nx, dy = aspect * L / ny;
  const double y = ny % 2 == 0 ? 0.5 * dy : 0.0;
  const FeedLocation loc = locate_feed(mesh, basis, Vec3(-0.5 * L + dx, y, 0.0), Vec3::UnitX());
  return FeedSpec{{loc.edge}, {voltage * loc.sign}};
}

/// Two feeds on opposite sides of a sphere's equator (on the y axis), both
/// driving current along +z, with the given relative phase of the second.
inline FeedSpec sphere_feeds(const TriMesh& mesh, const BasisSet& basis, double R, cplx second = 1.0) {
  const double eps = 1e-3 * R;
  const FeedLocation f1 = locate_feed(mesh, basis, Vec3(eps, R, 0.0), Vec3::UnitZ());
  const FeedLocation f2 = locate_feed(mesh, basis, Vec3(-eps, -R, 0.0), Vec3::UnitZ());
  if (f1.edge == f2.edge) throw std::invalid_argument("sphere feeds collapsed onto a single edge");
  return FeedSpec{{f1.edge, f2.edge}, {cplx(f1.sign), second * f2.sign}};
}

}  // namespace momtopt
