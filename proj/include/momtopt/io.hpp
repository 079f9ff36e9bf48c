#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "common.hpp"
#include "mesh.hpp"
#include "topopt.hpp"

namespace momtopt {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string next_line(std::istream& is, const char* what) {
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return line;
  }
  throw FormatError(std::string("unexpected end of file while reading ") + what);
}

template <class... Ts>
void parse_exact(const std::string& line, const char* what, Ts&... out) {
  std::istringstream ss(line);
  ss.imbue(std::locale::classic());
  (ss >> ... >> out);
  std::string rest;
  if (!ss || (ss >> rest)) throw FormatError(std::string("malformed ") + what + " line: '" + line + "'");
}

}  // namespace detail

/// `ntmesh 1`, `V T`, V vertex lines, T triangle lines (0-based).
inline void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os << "ntmesh 1\n" << mesh.vertex_count() << ' ' << mesh.triangle_count() << '\n';
  for (const auto& v : mesh.vertices)
    os << detail::fmt17(v.x()) << ' ' << detail::fmt17(v.y()) << ' ' << detail::fmt17(v.z()) << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline TriMesh read_mesh(std::istream& is) {
  if (detail::next_line(is, "mesh header") != "ntmesh 1") throw FormatError("not a mesh file (expected 'ntmesh 1')");
  long long V = 0, T = 0;
  detail::parse_exact(detail::next_line(is, "mesh counts"), "mesh counts", V, T);
  if (V < 3 || T < 1) throw FormatError("mesh needs at least 3 vertices and 1 triangle");
  std::vector<Vec3> verts(static_cast<std::size_t>(V));
  for (auto& v : verts) {
    double x, y, z;
    detail::parse_exact(detail::next_line(is, "vertex"), "vertex", x, y, z);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) throw FormatError("non-finite vertex coordinate");
    v = Vec3(x, y, z);
  }
  std::vector<std::array<int, 3>> tris(static_cast<std::size_t>(T));
  for (auto& t : tris) {
    long long i, j, k;
    detail::parse_exact(detail::next_line(is, "triangle"), "triangle", i, j, k);
    for (long long q : {i, j, k})
      if (q < 0 || q >= V) throw FormatError("triangle references vertex " + std::to_string(q) + " out of range");
    t = {static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)};
  }
  std::string extra;
  if (std::getline(is, extra) && extra.find_first_not_of(" \t\r") != std::string::npos)
    throw FormatError("trailing content after the last triangle");
  return TriMesh::build(std::move(verts), std::move(tris));
}

/// `ntdesign 1`, `T`, then T density values.
inline void write_design(std::ostream& os, const Eigen::VectorXd& rho_bar) {
  os << "ntdesign 1\n" << rho_bar.size() << '\n';
  for (Eigen::Index t = 0; t < rho_bar.size(); ++t) os << detail::fmt17(rho_bar[t]) << '\n';
}

inline Eigen::VectorXd read_design(std::istream& is) {
  if (detail::next_line(is, "design header") != "ntdesign 1") throw FormatError("not a design file (expected 'ntdesign 1')");
  long long T = 0;
  detail::parse_exact(detail::next_line(is, "design count"), "design count", T);
  if (T < 1) throw FormatError("design must have at least one entry");
  Eigen::VectorXd out(T);
  for (long long t = 0; t < T; ++t) {
    double v;
    detail::parse_exact(detail::next_line(is, "density"), "density", v);
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError("density value outside [0, 1] at entry " + std::to_string(t));
    out[t] = v;
  }
  std::string extra;
  if (std::getline(is, extra) && extra.find_first_not_of(" \t\r") != std::string::npos)
    throw FormatError("trailing content after the last density value");
  return out;
}

inline Eigen::VectorXd design_from_mask(const std::vector<char>& metal) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(metal.size()));
  for (std::size_t t = 0; t < metal.size(); ++t) v[static_cast<Eigen::Index>(t)] = metal[t] ? 1.0 : 0.0;
  return v;
}

template <class Fn>
auto with_input_file(const std::string& path, Fn&& fn) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open '" + path + "' for reading");
  return fn(f);
}

template <class Fn>
void with_output_file(const std::string& path, Fn&& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "' for writing");
  fn(f);
  f.flush();
  if (!f) throw FormatError("write to '" + path + "' failed");
}

inline TriMesh load_mesh(const std::string& path) {
  return with_input_file(path, [](std::istream& is) { return read_mesh(is); });
}

inline Eigen::VectorXd load_design(const std::string& path) {
  return with_input_file(path, [](std::istream& is) { return read_design(is); });
}

inline const char* log_header() { return "iter,Qe,Qm,Q,beta,max_drho,area_frac\n"; }

inline std::string log_row(const IterationRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.iter, r.Qe, r.Qm, r.Q, r.beta, r.max_drho,
                r.area_frac);
  return buf;
}

}  // namespace momtopt
