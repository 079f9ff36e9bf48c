#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"

namespace momtopt {

enum class CurveKind { Helix, Loxodrome };

inline const char* curve_name(CurveKind k) { return k == CurveKind::Helix ? "helix" : "loxodrome"; }

/// Spherical helix with M turns between the poles, t in [0, 1].
inline Vec3 helix_point(double M, double R, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("helix parameter t must lie in [0, 1]");
  const double f = std::sqrt(std::max(0.0, 1.0 - 4.0 * (t - 0.5) * (t - 0.5)));
  const double ph = 2.0 * pi * M * t;
  return R * Vec3(f * std::cos(ph), f * std::sin(ph), 2.0 * t - 1.0);
}

/// dr/dt of the helix; undefined at the poles.
inline Vec3 helix_tangent(double M, double R, double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::domain_error("helix tangent is defined for t in (0, 1)");
  const double f = std::sqrt(1.0 - 4.0 * (t - 0.5) * (t - 0.5));
  const double df = -4.0 * (t - 0.5) / f;
  const double w = 2.0 * pi * M;
  const double ph = w * t;
  return R * Vec3(df * std::cos(ph) - f * w * std::sin(ph), df * std::sin(ph) + f * w * std::cos(ph), 2.0);
}

/// Rhumb line crossing every meridian at the same angle; gamma is the slope.
inline Vec3 loxodrome_point(double gamma, double R, double t) {
  if (!std::isfinite(t)) throw std::domain_error("loxodrome parameter must be finite");
  const double ch = std::cosh(gamma * t);
  return R * Vec3(std::cos(t) / ch, std::sin(t) / ch, std::tanh(gamma * t));
}

struct SphericalComponents {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
};

/// Components of `v` in the local (r, theta, phi) frame at `point`.
inline SphericalComponents spherical_components(const Vec3& point, const Vec3& v) {
  const double rr = point.norm();
  const double th = std::acos(std::clamp(point.z() / rr, -1.0, 1.0));
  const double ph = std::atan2(point.y(), point.x());
  const Vec3 er = point / rr;
  const Vec3 et(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
  const Vec3 ep(-std::sin(ph), std::cos(ph), 0.0);
  return {v.dot(er), v.dot(et), v.dot(ep)};
}

struct LoxodromeTangent {
  double magnitude = 0.0;   // |dr/dt| for R = 1
  SphericalComponents unit;  // components of the unit tangent
};

inline LoxodromeTangent loxodrome_tangent(double gamma, double t) {
  if (!std::isfinite(t)) throw std::domain_error("loxodrome parameter must be finite");
  const double s = std::sqrt(1.0 + gamma * gamma);
  LoxodromeTangent out;
  out.magnitude = s / std::cosh(gamma * t);
  out.unit = {0.0, -gamma / s, 1.0 / s};
  return out;
}

/// Angle (rad) between a tangent and the local meridian direction.
inline double meridian_angle(const Vec3& point, const Vec3& tangent) {
  const auto c = spherical_components(point, tangent);
  return std::atan2(std::abs(c.phi), std::abs(c.theta));
}

/// Projection from the north pole onto the equatorial plane, returned as (x, y).
inline Eigen::Vector2d stereographic(const Vec3& point, double R) {
  const double den = R - point.z();
  if (!(den > 0.0)) throw std::domain_error("stereographic projection undefined at the north pole");
  return Eigen::Vector2d(point.x(), point.y()) * (R / den);
}

struct SphericalCurve {
  CurveKind kind = CurveKind::Helix;
  double R = 1.0;
  /// Turns M (helix) or slope gamma (loxodrome).
  double param = 1.0;
  int samples = 200;
  /// Loxodrome parameter range [-t_max, t_max]; the helix always spans [0, 1].
  double t_max = 3.0 * pi;
  int arms = 1;

  void validate() const {
    if (!(R > 0.0)) throw std::invalid_argument("curve radius must be > 0");
    if (samples < 2) throw std::invalid_argument("curve needs at least 2 samples");
    if (arms != 1 && arms != 2) throw std::invalid_argument("curve arms must be 1 or 2");
    if (kind == CurveKind::Helix && !(param > 0.0)) throw std::invalid_argument("helix turns must be > 0");
    if (kind == CurveKind::Loxodrome && !(param != 0.0 && std::isfinite(param)))
      throw std::invalid_argument("loxodrome slope must be finite and non-zero");
    if (kind == CurveKind::Loxodrome && !(t_max > 0.0 && std::isfinite(t_max)))
      throw std::invalid_argument("loxodrome t_max must be finite and > 0");
  }
};

struct CurveSample {
  double t = 0.0;
  Vec3 r = Vec3::Zero();
};

/// Samples one arm; arm 1 is arm 0 rotated by pi about the z axis.
inline std::vector<CurveSample> sample_curve(const SphericalCurve& c, int arm = 0) {
  c.validate();
  if (arm < 0 || arm >= c.arms) throw std::invalid_argument("curve arm index out of range");
  std::vector<CurveSample> out(static_cast<std::size_t>(c.samples));
  const double t0 = c.kind == CurveKind::Helix ? 0.0 : -c.t_max;
  const double t1 = c.kind == CurveKind::Helix ? 1.0 : c.t_max;
  for (int i = 0; i < c.samples; ++i) {
    const double t = i + 1 == c.samples ? t1 : t0 + (t1 - t0) * i / (c.samples - 1);
    Vec3 p = c.kind == CurveKind::Helix ? helix_point(c.param, c.R, t) : loxodrome_point(c.param, c.R, t);
    if (arm == 1) p = Vec3(-p.x(), -p.y(), p.z());
    out[static_cast<std::size_t>(i)] = {t, p};
  }
  return out;
}

/// One block per arm: `kind,param,R,samples` header and values, then `t,x,y,z` rows.
inline void write_polyline(std::ostream& os, const SphericalCurve& c) {
  c.validate();
  char buf[160];
  for (int arm = 0; arm < c.arms; ++arm) {
    os << "kind,param,R,samples\n";
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%d\n", curve_name(c.kind), c.param, c.R, c.samples);
    os << buf << "t,x,y,z\n";
    for (const auto& s : sample_curve(c, arm)) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", s.t, s.r.x(), s.r.y(), s.r.z());
      os << buf;
    }
  }
}

}  // namespace momtopt
