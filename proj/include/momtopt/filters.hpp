#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "common.hpp"
#include "mesh.hpp"

namespace momtopt {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Linear-hat convolution filter, W_tj proportional to (Rmin - |r_t - r_j|) over B_t.
struct DensityFilter {
  double Rmin = 0.0;
  SparseRowMatrix W;

  Eigen::Index size() const { return W.rows(); }
};

/// Smoothed Heaviside projection parameters.
struct ProjectionSpec {
  double beta = 1.0;
  double eta = 0.5;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("projection sharpness beta must be > 0");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("projection level eta must be in (0, 1)");
  }
};

/// Design, filtered and projected densities plus the pinned (feed) triangles.
struct DesignField {
  Eigen::VectorXd rho;
  Eigen::VectorXd rho_tilde;
  Eigen::VectorXd rho_bar;
  std::vector<char> fixed;
  Eigen::VectorXd pinned_value;

  Eigen::Index size() const { return rho.size(); }
  bool is_fixed(Eigen::Index t) const { return fixed[static_cast<std::size_t>(t)] != 0; }
};

inline DensityFilter build_density_filter(const TriMesh& mesh, double Rmin) {
  if (!(Rmin >= 0.0)) throw std::invalid_argument("filter radius must be non-negative");
  const auto T = static_cast<Eigen::Index>(mesh.triangle_count());
  DensityFilter f;
  f.Rmin = Rmin;
  f.W.resize(T, T);
  if (Rmin == 0.0) {
    f.W.setIdentity();
    return f;
  }
  const auto hoods = neighborhoods(mesh, Rmin);
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& hood = hoods[static_cast<std::size_t>(t)];
    double sum = 0.0;
    for (int j : hood) sum += Rmin - (mesh.centroids[t] - mesh.centroids[j]).norm();
    for (int j : hood) {
      const double w = Rmin - (mesh.centroids[t] - mesh.centroids[j]).norm();
      if (w > 0.0) trip.emplace_back(t, j, w / sum);
    }
  }
  f.W.setFromTriplets(trip.begin(), trip.end());
  f.W.makeCompressed();
  return f;
}

inline Eigen::VectorXd apply_density(const DensityFilter& filter, const Eigen::VectorXd& rho) {
  if (rho.size() != filter.size()) throw std::invalid_argument("apply_density: dimension mismatch");
  return filter.W * rho;
}

inline double project(double rho_tilde, const ProjectionSpec& spec) {
  const double den = std::tanh(spec.beta * spec.eta) + std::tanh(spec.beta * (1.0 - spec.eta));
  return (std::tanh(spec.beta * spec.eta) + std::tanh(spec.beta * (rho_tilde - spec.eta))) / den;
}

inline double project_derivative(double rho_tilde, const ProjectionSpec& spec) {
  const double den = std::tanh(spec.beta * spec.eta) + std::tanh(spec.beta * (1.0 - spec.eta));
  const double th = std::tanh(spec.beta * (rho_tilde - spec.eta));
  return spec.beta * (1.0 - th * th) / den;
}

inline Eigen::VectorXd project(const Eigen::VectorXd& rho_tilde, const ProjectionSpec& spec) {
  return rho_tilde.unaryExpr([&](double x) { return project(x, spec); });
}

inline Eigen::VectorXd project_derivative(const Eigen::VectorXd& rho_tilde, const ProjectionSpec& spec) {
  return rho_tilde.unaryExpr([&](double x) { return project_derivative(x, spec); });
}

/// Fresh design field with every free triangle at `value` and the listed triangles pinned to 1.
inline DesignField make_design(Eigen::Index T, double value, std::span<const int> pinned) {
  DesignField d;
  d.rho = Eigen::VectorXd::Constant(T, value);
  d.fixed.assign(static_cast<std::size_t>(T), 0);
  d.pinned_value = Eigen::VectorXd::Zero(T);
  for (int t : pinned) {
    d.fixed.at(static_cast<std::size_t>(t)) = 1;
    d.pinned_value[t] = 1.0;
    d.rho[t] = 1.0;
  }
  d.rho_tilde = d.rho;
  d.rho_bar = d.rho;
  return d;
}

/// Recomputes rho_tilde and rho_bar from rho. Pinned triangles keep their value
/// in all three fields but still act as filter sources for their neighbors.
inline void update_physical(DesignField& d, const DensityFilter& filter, const ProjectionSpec& spec) {
  for (Eigen::Index t = 0; t < d.size(); ++t)
    if (d.is_fixed(t)) d.rho[t] = d.pinned_value[t];
  d.rho_tilde = apply_density(filter, d.rho);
  d.rho_bar = project(d.rho_tilde, spec);
  for (Eigen::Index t = 0; t < d.size(); ++t) {
    if (d.is_fixed(t)) {
      d.rho_tilde[t] = d.pinned_value[t];
      d.rho_bar[t] = d.pinned_value[t];
    }
  }
}

/// dQ/drho = W^T (dQ/drho_bar .* drho_bar/drho_tilde); pinned triangles neither
/// pass gradient through their projected value nor receive any.
inline Eigen::VectorXd backpropagate(const Eigen::VectorXd& dq_drho_bar, const DensityFilter& filter,
                                     const Eigen::VectorXd& rho_tilde, const ProjectionSpec& spec,
                                     std::span<const char> fixed = {}) {
  if (dq_drho_bar.size() != filter.size() || rho_tilde.size() != filter.size())
    throw std::invalid_argument("backpropagate: dimension mismatch");
  if (!fixed.empty() && static_cast<Eigen::Index>(fixed.size()) != filter.size())
    throw std::invalid_argument("backpropagate: mask length mismatch");
  Eigen::VectorXd g = dq_drho_bar.cwiseProduct(project_derivative(rho_tilde, spec));
  for (std::size_t t = 0; t < fixed.size(); ++t)
    if (fixed[t]) g[static_cast<Eigen::Index>(t)] = 0.0;
  Eigen::VectorXd out = filter.W.transpose() * g;
  for (std::size_t t = 0; t < fixed.size(); ++t)
    if (fixed[t]) out[static_cast<Eigen::Index>(t)] = 0.0;
  return out;
}

/// Pure-binary design: rho_bar >= 0.5 -> 1, otherwise 0; pinned triangles take their pinned value.
inline std::vector<char> hard_threshold(const Eigen::VectorXd& rho_bar, std::span<const char> fixed = {},
                                        const Eigen::VectorXd* pinned_value = nullptr) {
  std::vector<char> out(static_cast<std::size_t>(rho_bar.size()));
  for (Eigen::Index t = 0; t < rho_bar.size(); ++t) out[static_cast<std::size_t>(t)] = rho_bar[t] >= 0.5 ? 1 : 0;
  for (std::size_t t = 0; t < fixed.size(); ++t) {
    if (!fixed[t]) continue;
    const double v = pinned_value ? (*pinned_value)[static_cast<Eigen::Index>(t)] : 1.0;
    out[t] = v >= 0.5 ? 1 : 0;
  }
  return out;
}

}  // namespace momtopt
