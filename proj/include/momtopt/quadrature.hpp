#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"

namespace momtopt {

/// Quadrature rule on a triangle in barycentric coordinates. Weights sum to 1,
/// i.e. they are fractions of the triangle area.
struct TriangleRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
  std::string name;

  std::size_t size() const { return weights.size(); }

  Vec3 point(std::size_t q, const Vec3& p0, const Vec3& p1, const Vec3& p2) const {
    return bary[q][0] * p0 + bary[q][1] * p1 + bary[q][2] * p2;
  }
};

namespace detail {

inline void add_orbit3(TriangleRule& r, double a, double b, double w) {
  r.bary.push_back({a, b, b});
  r.bary.push_back({b, a, b});
  r.bary.push_back({b, b, a});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

inline void add_orbit6(TriangleRule& r, double a, double b, double c, double w) {
  r.bary.push_back({a, b, c});
  r.bary.push_back({a, c, b});
  r.bary.push_back({b, a, c});
  r.bary.push_back({b, c, a});
  r.bary.push_back({c, a, b});
  r.bary.push_back({c, b, a});
  for (int i = 0; i < 6; ++i) r.weights.push_back(w);
}

}  // namespace detail

/// Symmetric Dunavant rules. Supported exactness degrees: 1, 2, 4, 5, 7
/// (1, 3, 6, 7 and 13 points).
inline TriangleRule dunavant_rule(int degree) {
  TriangleRule r;
  r.name = "dunavant" + std::to_string(degree);
  switch (degree) {
    case 1:
      r.bary.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(1.0);
      break;
    case 2:
      detail::add_orbit3(r, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 4:
      detail::add_orbit3(r, 0.108103018168070, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(r, 0.816847572980459, 0.091576213509771, 0.109951743655322);
      break;
    case 5:
      r.bary.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(0.225);
      detail::add_orbit3(r, 0.059715871789770, 0.470142064105115, 0.132394152788506);
      detail::add_orbit3(r, 0.797426985353087, 0.101286507323456, 0.125939180544827);
      break;
    case 7:
      r.bary.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
      r.weights.push_back(-0.149570044467682);
      detail::add_orbit3(r, 0.479308067841920, 0.260345966079040, 0.175615257433208);
      detail::add_orbit3(r, 0.869739794195568, 0.065130102902216, 0.053347235608838);
      detail::add_orbit6(r, 0.048690315425316, 0.312865496004874, 0.638444188569810, 0.077113760890257);
      break;
    default:
      throw std::invalid_argument("unsupported Dunavant degree " + std::to_string(degree));
  }
  return r;
}

/// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be >= 1");
  x.assign(static_cast<std::size_t>(n), 0.0);
  w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// Collapsed (Duffy) Gauss product rule with n*n points, exact to degree 2n-2.
inline TriangleRule collapsed_gauss_rule(int n) {
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  TriangleRule r;
  r.name = "collapsed" + std::to_string(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = x[i];
      const double v = x[j] * (1.0 - u);
      r.bary.push_back({1.0 - u - v, u, v});
      // Duffy Jacobian (1-u) over the reference area 1/2
      r.weights.push_back(2.0 * w[i] * w[j] * (1.0 - u));
    }
  }
  return r;
}

}  // namespace momtopt
