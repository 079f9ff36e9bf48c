#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace momtopt {

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
/// Free-space wave impedance (Ohm).
inline constexpr double eta0 = 376.730313668;
/// Speed of light in vacuum (m/s).
inline constexpr double c0 = 299792458.0;

/// Mesh topology that RWG functions cannot be built on (non-manifold edges, bad indices).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical assembly failure (degenerate triangle, NaN entry).
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular or ill-conditioned system, failed residual check.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The delta-gap feed lost its basis function after thresholding.
class FeedIsolatedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or configuration input.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace momtopt
