#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "em_operators.hpp"
#include "filters.hpp"
#include "material_model.hpp"
#include "mesh.hpp"

namespace momtopt {

/// Process-wide count of dense LU factorizations (instrumentation for reuse checks).
inline std::atomic<long>& factorization_counter() {
  static std::atomic<long> count{0};
  return count;
}

struct SolverOptions {
  double max_residual = 1e-10;
  double min_rcond = 1e-14;
  double symmetry_tol = 1e-10;
};

/// Solution of Z I = V together with the reusable factorization of Z.
struct StateSolution {
  VectorXcd I;
  std::shared_ptr<const Eigen::PartialPivLU<MatrixXcd>> lu;
  std::shared_ptr<const MatrixXcd> Z;
  bool symmetric = true;
  double residual = 0.0;
};

struct QFactors {
  double Prad = 0.0;
  double We = 0.0;
  double Wm = 0.0;
  double Qe = 0.0;
  double Qm = 0.0;
  double Q = 0.0;
};

namespace detail {

inline double relative_residual(const MatrixXcd& Z, const VectorXcd& x, const VectorXcd& b) {
  const double nb = b.norm();
  return (Z * x - b).norm() / (nb > 0.0 ? nb : 1.0);
}

inline double relative_asymmetry(const MatrixXcd& Z) {
  const double nz = Z.cwiseAbs().maxCoeff();
  if (nz == 0.0) return 0.0;
  return (Z - Z.transpose()).cwiseAbs().maxCoeff() / nz;
}

inline double quad_form(const VectorXcd& I, const MatrixXd& M) {
  return (I.adjoint() * (M.cast<cplx>() * I))(0).real();
}

}  // namespace detail

/// Factorizes Z (one counted factorization) and solves for the current.
inline StateSolution solve_state(MatrixXcd Z, const VectorXcd& V, const SolverOptions& opts = {}) {
  if (Z.rows() != Z.cols() || Z.rows() != V.size()) throw std::invalid_argument("solve_state: dimension mismatch");
  if (V.norm() == 0.0) throw std::invalid_argument("solve_state: zero excitation");
  StateSolution s;
  s.symmetric = detail::relative_asymmetry(Z) <= opts.symmetry_tol;
  auto Zp = std::make_shared<const MatrixXcd>(std::move(Z));
  auto lu = std::make_shared<Eigen::PartialPivLU<MatrixXcd>>(*Zp);
  ++factorization_counter();
  const double rc = lu->rcond();
  if (!(rc > opts.min_rcond))
    throw SolverError("system matrix is singular or ill-conditioned (rcond estimate " + std::to_string(rc) + ")");
  s.I = lu->solve(V);
  s.residual = detail::relative_residual(*Zp, s.I, V);
  if (!(s.residual <= opts.max_residual))
    throw SolverError("state solve residual " + std::to_string(s.residual) + " above tolerance");
  s.lu = std::move(lu);
  s.Z = std::move(Zp);
  return s;
}

inline StateSolution solve_state(const MatrixXcd& Z0, const MatrixXd& Zrho, const VectorXcd& V,
                                 const SolverOptions& opts = {}) {
  if (Z0.rows() != Zrho.rows() || Z0.cols() != Zrho.cols()) throw std::invalid_argument("solve_state: dimension mismatch");
  MatrixXcd Z = Z0;
  Z.real() += Zrho;
  return solve_state(std::move(Z), V, opts);
}

/// Solves Z^T lambda = rhs with the stored factorization of Z.
inline VectorXcd solve_adjoint(const StateSolution& state, const VectorXcd& rhs, const SolverOptions& opts = {}) {
  if (!state.lu) throw std::invalid_argument("solve_adjoint: state holds no factorization");
  VectorXcd lambda = state.symmetric ? VectorXcd(state.lu->solve(rhs)) : VectorXcd(state.lu->transpose().solve(rhs));
  const double res = detail::relative_residual(state.Z->transpose(), lambda, rhs);
  if (!(res <= opts.max_residual || rhs.norm() == 0.0))
    throw SolverError("adjoint solve residual " + std::to_string(res) + " above tolerance");
  return lambda;
}

/// Q_e/m = Re(I^H X_e/m I) / Re(I^H R0 I), Q = max(Q_e, Q_m).
inline QFactors q_factors(const VectorXcd& I, const MatrixXd& Xe, const MatrixXd& Xm, const MatrixXd& R0, double omega) {
  const double pr = detail::quad_form(I, R0);
  if (!(pr > 0.0)) throw SolverError("current does not radiate (non-positive radiated power)");
  const double xe = detail::quad_form(I, Xe);
  const double xm = detail::quad_form(I, Xm);
  QFactors q;
  q.Prad = 0.5 * pr;
  q.We = xe / (4.0 * omega);
  q.Wm = xm / (4.0 * omega);
  q.Qe = xe / pr;
  q.Qm = xm / pr;
  q.Q = std::max(q.Qe, q.Qm);
  return q;
}

inline QFactors q_factors(const VectorXcd& I, const OperatorSet& ops) {
  return q_factors(I, ops.Xe, ops.Xm, ops.R0, ops.omega);
}

/// Right-hand side -(dQ/dI)^T with dQ/dI = I^H (X - Q R0) / (2 Prad).
inline VectorXcd adjoint_rhs(const VectorXcd& I, double q_em, double prad, const MatrixXd& X_em, const MatrixXd& R0) {
  const MatrixXd M = X_em - q_em * R0;
  return -(M.cast<cplx>() * I.conjugate()) / (2.0 * prad);
}

/// dQ/drho_bar_t = 2 Re{ lambda^T Rs'(rho_bar_t) Psi^t I }.
inline Eigen::VectorXd sensitivities(const VectorXcd& lambda, const VectorXcd& I, std::span<const double> rho_bar,
                                     const std::vector<ElementMatrix>& psi, const InterpolationSpec& spec) {
  if (rho_bar.size() != psi.size()) throw std::invalid_argument("sensitivities: density length != triangle count");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(psi.size()));
  for (std::size_t t = 0; t < psi.size(); ++t) {
    const auto& em = psi[t];
    cplx acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (em.index[i] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        if (em.index[j] < 0) continue;
        acc += lambda[em.index[i]] * em.block(i, j) * I[em.index[j]];
      }
    }
    if (acc == 0.0) continue;
    out[static_cast<Eigen::Index>(t)] = 2.0 * d_surface_resistivity(rho_bar[t], spec) * acc.real();
  }
  return out;
}

/// Full analysis of a gray design: state, Q factors and both adjoint gradients
/// with respect to the projected densities (one factorization, three solves).
struct GrayAnalysis {
  StateSolution state;
  QFactors q;
  Eigen::VectorXd dQe_drho_bar;
  Eigen::VectorXd dQm_drho_bar;
  VectorXcd lambda_e;
  VectorXcd lambda_m;
};

inline GrayAnalysis analyze_gray(const OperatorSet& ops, std::span<const double> rho_bar, const InterpolationSpec& spec,
                                 bool with_gradient = true, const SolverOptions& sopts = {}) {
  GrayAnalysis g;
  g.state = solve_state(system_matrix(ops.Z0, rho_bar, ops.psi, spec), ops.V, sopts);
  g.q = q_factors(g.state.I, ops);
  if (with_gradient) {
    g.lambda_e = solve_adjoint(g.state, adjoint_rhs(g.state.I, g.q.Qe, g.q.Prad, ops.Xe, ops.R0), sopts);
    g.lambda_m = solve_adjoint(g.state, adjoint_rhs(g.state.I, g.q.Qm, g.q.Prad, ops.Xm, ops.R0), sopts);
    g.dQe_drho_bar = sensitivities(g.lambda_e, g.state.I, rho_bar, ops.psi, spec);
    g.dQm_drho_bar = sensitivities(g.lambda_m, g.state.I, rho_bar, ops.psi, spec);
  }
  return g;
}

/// Basis functions whose two triangles are both metal.
inline std::vector<int> metal_basis_indices(const BasisSet& basis, std::span<const char> metal) {
  std::vector<int> keep;
  for (std::size_t n = 0; n < basis.N(); ++n) {
    const auto& f = basis.functions[n];
    if (metal[static_cast<std::size_t>(f.tri_plus)] && metal[static_cast<std::size_t>(f.tri_minus)])
      keep.push_back(static_cast<int>(n));
  }
  return keep;
}

struct ThresholdResult {
  QFactors q;
  VectorXcd I_reduced;
  std::vector<int> kept;  // indices into the full basis
};

/// PEC analysis of a binary design on the reduced basis (no material matrix).
inline ThresholdResult thresholded_analysis(const TriMesh& mesh, const BasisSet& basis, std::span<const char> metal,
                                            const FeedSpec& feeds, double k, const OperatorOptions& opts = {}) {
  if (metal.size() != mesh.triangle_count()) throw std::invalid_argument("thresholded_analysis: design length mismatch");
  ThresholdResult r;
  r.kept = metal_basis_indices(basis, metal);
  std::vector<char> kept_flag(basis.N(), 0);
  for (int n : r.kept) kept_flag[static_cast<std::size_t>(n)] = 1;
  for (int e : feeds.edges) {
    const int m = basis.edge_to_function.at(static_cast<std::size_t>(e));
    if (m < 0 || !kept_flag[static_cast<std::size_t>(m)])
      throw FeedIsolatedError("feed isolated: the basis function of feed edge " + std::to_string(e) +
                              " touches a void triangle");
  }
  const BasisSet reduced = restrict_basis(mesh, basis, r.kept);
  const OperatorSet ops = build_operators(mesh, reduced, k, feeds, opts);
  const StateSolution st = solve_state(ops.Z0, ops.V);
  r.q = q_factors(st.I, ops);
  r.I_reduced = st.I;
  return r;
}

/// Whether |Qe - Qm| / Q is within `tol` (0.05 by default).
inline bool self_resonant(const QFactors& q, double tol = 0.05) { return std::abs(q.Qe - q.Qm) <= tol * q.Q; }

struct SweepRow {
  double ka = 0.0;
  QFactors q;
  bool ok = false;
  std::string error;
};

enum class SweepMode { Gray, Thresholded };

/// Re-assembles the operators at each ka and evaluates a fixed design. A failing
/// point is reported in its row and the sweep continues.
inline std::vector<SweepRow> frequency_sweep(const TriMesh& mesh, const BasisSet& basis, const Eigen::VectorXd& rho_bar,
                                             SweepMode mode, std::span<const double> ka_list, const FeedSpec& feeds,
                                             const InterpolationSpec& spec = {}, const OperatorOptions& opts = {}) {
  if (ka_list.empty()) throw std::invalid_argument("frequency_sweep: empty ka list");
  for (std::size_t i = 0; i < ka_list.size(); ++i) {
    if (!(ka_list[i] > 0.0)) throw std::invalid_argument("frequency_sweep: ka values must be positive");
    if (i > 0 && !(ka_list[i] > ka_list[i - 1])) throw std::invalid_argument("frequency_sweep: ka list must be increasing");
  }
  if (rho_bar.size() != static_cast<Eigen::Index>(mesh.triangle_count()))
    throw std::invalid_argument("frequency_sweep: design length mismatch");
  std::vector<SweepRow> rows;
  std::vector<char> metal;
  if (mode == SweepMode::Thresholded) metal = hard_threshold(rho_bar);
  for (double ka : ka_list) {
    SweepRow row;
    row.ka = ka;
    try {
      const double k = ka / mesh.a;
      if (mode == SweepMode::Gray) {
        const OperatorSet ops = build_operators(mesh, basis, k, feeds, opts);
        row.q = analyze_gray(ops, std::span<const double>(rho_bar.data(), static_cast<std::size_t>(rho_bar.size())), spec,
                             false)
                    .q;
      } else {
        row.q = thresholded_analysis(mesh, basis, metal, feeds, k, opts).q;
      }
      row.ok = true;
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    rows.push_back(row);
  }
  return rows;
}

/// Sweep table: header `ka,Qe,Qm,Q,selfres`, 12 significant digits. Failed rows carry `nan` values.
inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows, double selfres_tol = 0.05) {
  os << "ka,Qe,Qm,Q,selfres\n";
  char buf[256];
  for (const auto& r : rows) {
    if (r.ok) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%d\n", r.ka, r.q.Qe, r.q.Qm, r.q.Q,
                    self_resonant(r.q, selfres_tol) ? 1 : 0);
    } else {
      std::snprintf(buf, sizeof buf, "%.12g,nan,nan,nan,0\n", r.ka);
    }
    os << buf;
  }
}

}  // namespace momtopt
