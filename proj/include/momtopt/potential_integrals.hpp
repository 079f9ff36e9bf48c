#pragma once

#include <cmath>

#include "common.hpp"

namespace momtopt {

/// Closed-form integrals of the static kernel over a flat triangle:
/// scalar = \int_T 1/|r - r'| dS', vector = \int_T r' / |r - r'| dS'.
struct StaticIntegrals {
  double scalar = 0.0;
  Vec3 vector = Vec3::Zero();
};

/// Edge-by-edge evaluation after Wilton et al. / Graglia. The observation point
/// may lie anywhere, including inside the triangle or on its edges.
inline StaticIntegrals static_integrals(const Vec3& r, const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  const Vec3 nrm = (p1 - p0).cross(p2 - p0).normalized();
  const double d = nrm.dot(r - p0);
  const double ad = std::abs(d);
  const Vec3 rho = r - d * nrm;
  const Vec3* verts[3] = {&p0, &p1, &p2};

  double scalar = 0.0;
  Vec3 in_plane = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = *verts[i];
    const Vec3& b = *verts[(i + 1) % 3];
    const double len = (b - a).norm();
    const Vec3 l = (b - a) / len;
    const Vec3 u = l.cross(nrm);
    const double s_minus = (a - r).dot(l);
    const double s_plus = (b - r).dot(l);
    const double t0 = (a - rho).dot(u);
    const double r0_sq = t0 * t0 + d * d;
    const double r_minus = (a - r).norm();
    const double r_plus = (b - r).norm();

    double f2 = 0.0;
    const bool on_edge_line = r0_sq < 1e-24 * len * len;
    if (!on_edge_line) {
      if (s_minus >= 0.0) {
        f2 = std::log((r_plus + s_plus) / (r_minus + s_minus));
      } else if (s_plus <= 0.0) {
        f2 = std::log((r_minus - s_minus) / (r_plus - s_plus));
      } else {
        f2 = std::log((r_plus + s_plus) * (r_minus - s_minus) / r0_sq);
      }
    }
    scalar += t0 * f2;
    if (ad > 0.0) {
      const double beta = std::atan2(t0 * s_plus, r0_sq + ad * r_plus) - std::atan2(t0 * s_minus, r0_sq + ad * r_minus);
      scalar -= ad * beta;
    }
    in_plane += 0.5 * u * (r0_sq * f2 + s_plus * r_plus - s_minus * r_minus);
  }
  StaticIntegrals out;
  out.scalar = scalar;
  out.vector = in_plane + rho * scalar;
  return out;
}

}  // namespace momtopt
