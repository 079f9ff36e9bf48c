#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "em_operators.hpp"

namespace momtopt {

/// Resistivity interpolation Rs(rho) = omega_hi * (omega_lo / omega_hi)^f(rho)
/// with the RAMP-like penalization f(rho) = rho / (1 + p (1 - rho)).
struct InterpolationSpec {
  double omega_lo = 1.0;  // metal side (Ohm/sq)
  double omega_hi = 1e5;  // vacuum side (Ohm/sq)
  double p = 1.0;

  void validate() const {
    if (!(omega_lo > 0.0) || !(omega_hi > omega_lo))
      throw std::invalid_argument("interpolation requires omega_hi > omega_lo > 0");
    if (!(p >= 0.0)) throw std::invalid_argument("interpolation penalty p must be >= 0");
  }
};

namespace detail {
inline void check_density(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::domain_error("density " + std::to_string(rho) + " outside [0, 1]");
}
}  // namespace detail

inline double ramp(double rho, double p) {
  detail::check_density(rho);
  return rho / (1.0 + p * (1.0 - rho));
}

/// df/drho = (1 + p) / (1 + p (1 - rho))^2
inline double ramp_derivative(double rho, double p) {
  detail::check_density(rho);
  const double den = 1.0 + p * (1.0 - rho);
  return (1.0 + p) / (den * den);
}

inline double surface_resistivity(double rho_bar, const InterpolationSpec& spec) {
  return spec.omega_hi * std::pow(spec.omega_lo / spec.omega_hi, ramp(rho_bar, spec.p));
}

inline double d_surface_resistivity(double rho_bar, const InterpolationSpec& spec) {
  return surface_resistivity(rho_bar, spec) * std::log(spec.omega_lo / spec.omega_hi) * ramp_derivative(rho_bar, spec.p);
}

/// Dense material matrix sum_t Rs_t Psi^t for given per-triangle resistivities.
inline MatrixXd assemble_Zrho_from_resistivity(std::span<const double> rs, const std::vector<ElementMatrix>& psi,
                                               Eigen::Index N) {
  if (rs.size() != psi.size()) throw std::invalid_argument("assemble_Zrho: resistivity length != triangle count");
  MatrixXd Z = MatrixXd::Zero(N, N);
  for (std::size_t t = 0; t < psi.size(); ++t) {
    const auto& em = psi[t];
    for (int i = 0; i < 3; ++i) {
      if (em.index[i] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        if (em.index[j] < 0) continue;
        Z(em.index[i], em.index[j]) += rs[t] * em.block(i, j);
      }
    }
  }
  return Z;
}

inline std::vector<double> resistivities(std::span<const double> rho_bar, const InterpolationSpec& spec) {
  std::vector<double> rs(rho_bar.size());
  for (std::size_t t = 0; t < rho_bar.size(); ++t) rs[t] = surface_resistivity(rho_bar[t], spec);
  return rs;
}

inline MatrixXd assemble_Zrho(std::span<const double> rho_bar, const std::vector<ElementMatrix>& psi,
                              const InterpolationSpec& spec, Eigen::Index N) {
  if (rho_bar.size() != psi.size()) throw std::invalid_argument("assemble_Zrho: density length != triangle count");
  const auto rs = resistivities(rho_bar, spec);
  return assemble_Zrho_from_resistivity(rs, psi, N);
}

/// Z0 + Zrho without materializing Zrho.
inline MatrixXcd system_matrix(const MatrixXcd& Z0, std::span<const double> rho_bar,
                               const std::vector<ElementMatrix>& psi, const InterpolationSpec& spec) {
  if (rho_bar.size() != psi.size()) throw std::invalid_argument("system_matrix: density length != triangle count");
  MatrixXcd Z = Z0;
  for (std::size_t t = 0; t < psi.size(); ++t) {
    const double rs = surface_resistivity(rho_bar[t], spec);
    const auto& em = psi[t];
    for (int i = 0; i < 3; ++i) {
      if (em.index[i] < 0) continue;
      for (int j = 0; j < 3; ++j) {
        if (em.index[j] < 0) continue;
        Z(em.index[i], em.index[j]) += rs * em.block(i, j);
      }
    }
  }
  return Z;
}

}  // namespace momtopt
