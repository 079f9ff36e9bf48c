#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "mesh.hpp"
#include "potential_integrals.hpp"
#include "quadrature.hpp"

namespace momtopt {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Quadrature settings of the EFIE assembly. Pairs whose centroid distance is
/// below near_factor * mean edge length use the near rules plus analytic
/// extraction of the static 1/R kernel; all other pairs use the far rules on
/// the full kernel.
struct QuadratureOptions {
  TriangleRule far_test = dunavant_rule(2);
  TriangleRule far_source = dunavant_rule(2);
  TriangleRule near_test = dunavant_rule(5);
  TriangleRule near_source = dunavant_rule(5);
  double near_factor = 2.0;

  std::string tag() const {
    return far_test.name + "/" + far_source.name + "/" + near_test.name + "/" + near_source.name + "/" +
           std::to_string(near_factor);
  }

  /// Next-higher rules everywhere (used for self-convergence checks).
  static QuadratureOptions refined() {
    QuadratureOptions q;
    q.far_test = dunavant_rule(5);
    q.far_source = dunavant_rule(5);
    q.near_test = dunavant_rule(7);
    q.near_source = dunavant_rule(7);
    return q;
  }
};

/// Sparse material element matrix of one triangle: block(i, j) = \int_t f_i . f_j dA
/// for the basis functions on its local edges (index -1 rows/cols are zero).
struct ElementMatrix {
  std::array<int, 3> index{-1, -1, -1};
  Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
};

/// Delta-gap excitation: V_m = voltage * l_m on every listed inner edge.
struct FeedSpec {
  std::vector<int> edges;
  std::vector<cplx> voltages;
};

namespace detail {

/// (exp(-jkR) - 1) / (4 pi R), finite at R = 0.
inline cplx smooth_kernel(double k, double R) {
  const double kr = k * R;
  if (kr < 1e-3) {
    const double k2 = k * k;
    return cplx(-0.5 * k2 * R, -k + k2 * k * R * R / 6.0) / (4.0 * pi) + cplx(k2 * k2 * R * R * R / 24.0, 0.0) / (4.0 * pi);
  }
  return (std::exp(cplx(0.0, -kr)) - 1.0) / (4.0 * pi * R);
}

inline cplx full_kernel(double k, double R) { return std::exp(cplx(0.0, -k * R)) / (4.0 * pi * R); }

}  // namespace detail

/// Galerkin mixed-potential EFIE matrices
///   Z_mn = j k eta0 \int\int [f_m . f_n - (1/k^2) div f_m div' f_n] G dS' dS,
///   G = exp(-jkR) / (4 pi R),
/// for each wavenumber in `ks`. Every returned matrix is exactly symmetric.
inline std::vector<MatrixXcd> assemble_impedance(const TriMesh& mesh, const BasisSet& basis,
                                                 std::span<const double> ks,
                                                 const QuadratureOptions& quad = {}) {
  for (double k : ks)
    if (!(k > 0.0)) throw std::invalid_argument("wavenumber must be positive");
  const int N = static_cast<int>(basis.N());
  const int nk = static_cast<int>(ks.size());
  const int T = static_cast<int>(mesh.triangle_count());
  std::vector<MatrixXcd> Z(static_cast<std::size_t>(nk), MatrixXcd::Zero(N, N));
  if (N == 0) return Z;

  for (int t = 0; t < T; ++t)
    if (!(mesh.areas[t] > 0.0)) throw AssemblyError("degenerate triangle " + std::to_string(t));

  const double near_dist = quad.near_factor * mesh.mean_edge_length();

  std::vector<char> has_basis(static_cast<std::size_t>(T), 0);
  for (int t = 0; t < T; ++t)
    for (const auto& lb : basis.support[t])
      if (lb.index >= 0) has_basis[t] = 1;

  // pre-computed source points per triangle for both rules
  auto make_points = [&](const TriangleRule& rule) {
    std::vector<std::vector<Vec3>> pts(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const auto& tri = mesh.triangles[t];
      for (std::size_t q = 0; q < rule.size(); ++q)
        pts[t].push_back(rule.point(q, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]));
    }
    return pts;
  };
  const auto far_src = make_points(quad.far_source);
  const auto near_src = make_points(quad.near_source);
  const auto far_tst = make_points(quad.far_test);
  const auto near_tst = make_points(quad.near_test);

#pragma omp parallel
  {
    // rows of the (up to) three basis functions of the current test triangle
    std::vector<MatrixXcd> rows(static_cast<std::size_t>(nk), MatrixXcd::Zero(3, N));
    std::vector<cplx> S(static_cast<std::size_t>(nk));
    std::vector<Eigen::Vector3cd> Vv(static_cast<std::size_t>(nk));

#pragma omp for schedule(dynamic, 4)
    for (int p = 0; p < T; ++p) {
      if (!has_basis[p]) continue;
      for (auto& r : rows) r.setZero();
      const double Ap = mesh.areas[p];

      for (int q = 0; q < T; ++q) {
        if (!has_basis[q]) continue;
        const bool near = (mesh.centroids[p] - mesh.centroids[q]).norm() < near_dist;
        const TriangleRule& trule = near ? quad.near_test : quad.far_test;
        const auto& tpts = near ? near_tst[p] : far_tst[p];
        const TriangleRule& srule = near ? quad.near_source : quad.far_source;
        const auto& spts = near ? near_src[q] : far_src[q];
        const auto& tri_q = mesh.triangles[q];
        const double Aq = mesh.areas[q];

        for (std::size_t it = 0; it < trule.size(); ++it) {
          const Vec3& r = tpts[it];
          const double wt = trule.weights[it] * Ap;
          for (int ik = 0; ik < nk; ++ik) {
            S[ik] = 0.0;
            Vv[ik].setZero();
          }
          if (near) {
            const StaticIntegrals st =
                static_integrals(r, mesh.vertices[tri_q[0]], mesh.vertices[tri_q[1]], mesh.vertices[tri_q[2]]);
            for (int ik = 0; ik < nk; ++ik) {
              S[ik] = st.scalar / (4.0 * pi);
              Vv[ik] = st.vector.cast<cplx>() / (4.0 * pi);
            }
            for (std::size_t is = 0; is < srule.size(); ++is) {
              const Vec3& rs = spts[is];
              const double R = (r - rs).norm();
              const double ws = srule.weights[is] * Aq;
              for (int ik = 0; ik < nk; ++ik) {
                const cplx g = ws * detail::smooth_kernel(ks[ik], R);
                S[ik] += g;
                Vv[ik] += g * rs.cast<cplx>();
              }
            }
          } else {
            for (std::size_t is = 0; is < srule.size(); ++is) {
              const Vec3& rs = spts[is];
              const double R = (r - rs).norm();
              const double ws = srule.weights[is] * Aq;
              for (int ik = 0; ik < nk; ++ik) {
                const cplx g = ws * detail::full_kernel(ks[ik], R);
                S[ik] += g;
                Vv[ik] += g * rs.cast<cplx>();
              }
            }
          }

          for (int i = 0; i < 3; ++i) {
            const LocalBasis& bm = basis.support[p][i];
            if (bm.index < 0) continue;
            const double lm = basis.functions[bm.index].length;
            const Vec3 fm = bm.sign * lm / (2.0 * Ap) * (r - mesh.vertices[bm.free_vertex]);
            const double divm = bm.sign * lm / Ap;
            for (int j = 0; j < 3; ++j) {
              const LocalBasis& bn = basis.support[q][j];
              if (bn.index < 0) continue;
              const double ln = basis.functions[bn.index].length;
              const double cn = bn.sign * ln / (2.0 * Aq);
              const double divn = bn.sign * ln / Aq;
              const Vec3& pn = mesh.vertices[bn.free_vertex];
              for (int ik = 0; ik < nk; ++ik) {
                const double k = ks[ik];
                const Eigen::Vector3cd an = cn * (Vv[ik] - pn.cast<cplx>() * S[ik]);
                const cplx vec_term = fm.cast<cplx>().dot(an);
                const cplx sca_term = divm * divn * S[ik] / (k * k);
                rows[ik](i, bn.index) += wt * cplx(0.0, k * eta0) * (vec_term - sca_term);
              }
            }
          }
        }
      }

#pragma omp critical(momtopt_assembly)
      for (int i = 0; i < 3; ++i) {
        const LocalBasis& bm = basis.support[p][i];
        if (bm.index < 0) continue;
        for (int ik = 0; ik < nk; ++ik) Z[ik].row(bm.index) += rows[ik].row(i);
      }
    }
  }

  for (auto& z : Z) {
    MatrixXcd sym = 0.5 * (z + z.transpose());
    z = std::move(sym);
    if (!z.allFinite()) throw AssemblyError("non-finite entry in impedance matrix");
  }
  return Z;
}

inline MatrixXcd assemble_Z0(const TriMesh& mesh, const BasisSet& basis, double k, const QuadratureOptions& quad = {}) {
  const double ks[1] = {k};
  return std::move(assemble_impedance(mesh, basis, ks, quad).front());
}

/// Central difference of X0 = Im Z0 in the wavenumber with relative step h,
/// returned as dX0/domega (Ohm s).
inline MatrixXd assemble_dX0_domega(const TriMesh& mesh, const BasisSet& basis, double k, double h = 1e-3,
                                    const QuadratureOptions& quad = {}) {
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("finite-difference step must be in (0, 1)");
  const double ks[2] = {k * (1.0 + h), k * (1.0 - h)};
  auto Z = assemble_impedance(mesh, basis, ks, quad);
  const double omega = k * c0;
  return (Z[0].imag() - Z[1].imag()) / (2.0 * h * omega);
}

/// Xe = (omega dX0/domega - X0)/2, Xm = (omega dX0/domega + X0)/2, so that
/// W_e/m = I^H X_e/m I / (4 omega) and Xm - Xe = X0.
inline std::pair<MatrixXd, MatrixXd> stored_energy_matrices(const MatrixXd& X0, const MatrixXd& dX0_domega,
                                                            double omega) {
  if (X0.rows() != dX0_domega.rows() || X0.cols() != dX0_domega.cols())
    throw std::invalid_argument("stored_energy_matrices: dimension mismatch");
  MatrixXd wdx = omega * dX0_domega;
  return {0.5 * (wdx - X0), 0.5 * (wdx + X0)};
}

/// Closed-form Gram blocks of the RWG functions on each triangle, using
/// \int_t lambda_a lambda_b dA = A (1 + delta_ab) / 12.
inline std::vector<ElementMatrix> assemble_material_elements(const TriMesh& mesh, const BasisSet& basis) {
  const std::size_t T = mesh.triangle_count();
  std::vector<ElementMatrix> psi(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& tri = mesh.triangles[t];
    const double A = mesh.areas[t];
    auto& em = psi[t];
    for (int i = 0; i < 3; ++i) em.index[i] = basis.support[t][i].index;
    for (int i = 0; i < 3; ++i) {
      const LocalBasis& bi = basis.support[t][i];
      if (bi.index < 0) continue;
      for (int j = i; j < 3; ++j) {
        const LocalBasis& bj = basis.support[t][j];
        if (bj.index < 0) continue;
        const Vec3& pi_ = mesh.vertices[bi.free_vertex];
        const Vec3& pj = mesh.vertices[bj.free_vertex];
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            s += (a == b ? 2.0 : 1.0) * (mesh.vertices[tri[a]] - pi_).dot(mesh.vertices[tri[b]] - pj);
        s *= A / 12.0;
        const double li = basis.functions[bi.index].length;
        const double lj = basis.functions[bj.index].length;
        const double v = bi.sign * bj.sign * li * lj / (4.0 * A * A) * s;
        em.block(i, j) = v;
        em.block(j, i) = v;
      }
    }
  }
  return psi;
}

/// Locates the inner edge closest to `point` that the current along
/// `direction` crosses (edge within 60 degrees of perpendicular), and returns
/// the voltage sign matching that current direction relative to the RWG
/// plus-to-minus orientation.
struct FeedLocation {
  int edge = -1;
  double sign = 1.0;
};

inline FeedLocation locate_feed(const TriMesh& mesh, const BasisSet& basis, const Vec3& point, const Vec3& direction) {
  const Vec3 d = direction.normalized();
  FeedLocation best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& f : basis.functions) {
    const Edge& e = mesh.edges[f.edge];
    const Vec3 ev = (mesh.vertices[e.v[1]] - mesh.vertices[e.v[0]]).normalized();
    if (std::abs(ev.dot(d)) > 0.5) continue;
    const double dist = (mesh.edge_midpoint(f.edge) - point).norm();
    if (dist < best_dist - 1e-12 * mesh.a) {
      best_dist = dist;
      best.edge = f.edge;
      const Vec3 flow = mesh.centroids[f.tri_minus] - mesh.centroids[f.tri_plus];
      best.sign = flow.dot(d) >= 0.0 ? 1.0 : -1.0;
    }
  }
  if (best.edge < 0) throw std::invalid_argument("no inner edge suitable for a feed near the requested point");
  return best;
}

inline VectorXcd delta_gap_excitation(const BasisSet& basis, const FeedSpec& feeds) {
  if (feeds.edges.size() != feeds.voltages.size()) throw std::invalid_argument("feed edges/voltages length mismatch");
  VectorXcd V = VectorXcd::Zero(static_cast<Eigen::Index>(basis.N()));
  for (std::size_t i = 0; i < feeds.edges.size(); ++i) {
    const int e = feeds.edges[i];
    if (e < 0 || static_cast<std::size_t>(e) >= basis.edge_to_function.size() || basis.edge_to_function[e] < 0)
      throw std::invalid_argument("feed edge " + std::to_string(e) + " is not an inner edge with a basis function");
    const int m = basis.edge_to_function[e];
    V[m] += feeds.voltages[i] * basis.functions[m].length;
  }
  return V;
}

/// Triangles adjacent to the feed edges.
inline std::vector<int> feed_triangles(const TriMesh& mesh, const FeedSpec& feeds) {
  std::vector<int> out;
  for (int e : feeds.edges)
    for (int i = 0; i < mesh.edges.at(static_cast<std::size_t>(e)).tri_count && i < 2; ++i) out.push_back(mesh.edges[e].tri[i]);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// All operators of one frequency point.
struct OperatorSet {
  MatrixXcd Z0;
  MatrixXd R0;
  MatrixXd X0;
  MatrixXd dX0_domega;
  MatrixXd Xe;
  MatrixXd Xm;
  std::vector<ElementMatrix> psi;
  VectorXcd V;
  double k = 0.0;
  double omega = 0.0;
};

struct OperatorOptions {
  QuadratureOptions quadrature{};
  double fd_step = 1e-3;
};

/// Assembles Z0 at k and at k(1 +- h) in a single pass over triangle pairs.
inline OperatorSet build_operators(const TriMesh& mesh, const BasisSet& basis, double k, const FeedSpec& feeds,
                                   const OperatorOptions& opts = {}) {
  const double h = opts.fd_step;
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("finite-difference step must be in (0, 1)");
  const double ks[3] = {k, k * (1.0 + h), k * (1.0 - h)};
  auto Z = assemble_impedance(mesh, basis, ks, opts.quadrature);
  OperatorSet ops;
  ops.k = k;
  ops.omega = k * c0;
  ops.Z0 = std::move(Z[0]);
  ops.R0 = ops.Z0.real();
  ops.X0 = ops.Z0.imag();
  ops.dX0_domega = (Z[1].imag() - Z[2].imag()) / (2.0 * h * ops.omega);
  std::tie(ops.Xe, ops.Xm) = stored_energy_matrices(ops.X0, ops.dX0_domega, ops.omega);
  ops.psi = assemble_material_elements(mesh, basis);
  ops.V = delta_gap_excitation(basis, feeds);
  return ops;
}

}  // namespace momtopt
