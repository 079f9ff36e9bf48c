#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "momtopt/io.hpp"
#include "momtopt/topopt.hpp"

namespace momtopt::cli {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : std::runtime_error((where.empty() ? std::string("/") : where) + ": " + what), pointer(where) {}
  std::string pointer;
};

enum class MeshKind { Plate, Sphere, File };
enum class FeedKind { Auto, Points };

struct MeshConfig {
  MeshKind kind = MeshKind::Plate;
  double L = 1.0;
  double aspect = 0.6;
  int nx = 20;
  int ny = 12;
  int subdiv = 3;
  double R = 1.0;
  std::string path;
};

struct FeedPoint {
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  cplx voltage = 1.0;
};

struct FeedConfig {
  FeedKind kind = FeedKind::Auto;
  /// Relative phase of the second sphere feed, in degrees.
  double phase_deg = 0.0;
  std::vector<FeedPoint> points;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix = "run";
};

struct GradcheckConfig {
  std::uint64_t seed = 1;
  double rho_lo = 0.2;
  double rho_hi = 0.8;
  double beta = 2.0;
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t max_triangles = 200;
};

struct RunConfig {
  MeshConfig mesh;
  FeedConfig feeds;
  OptConfig opt;
  OutputConfig output;
  GradcheckConfig gradcheck;
  std::string seed_path;
  std::optional<int> threads;
};

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) {
  return (json::json_pointer(ptr) / key).to_string();
}

class Reader {
 public:
  Reader(const json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) throw ConfigError(ptr_, "expected an object");
  }

  /// Call once every key has been read; anything left over is unknown.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(child(ptr_, k), "unknown key");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return child(ptr_, key); }

  void number(const std::string& key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw ConfigError(where(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<long long>() >= 0) {
          out = v->get<Int>();
          return;
        }
        throw ConfigError(where(key), "expected a non-negative integer");
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw ConfigError(where(key), "expected a string");
      out = v->get<std::string>();
    }
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

inline Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where, "expected an array of 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError(where, "expected an array of 3 numbers");
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
  }
  return out;
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  const std::filesystem::path p(path);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

inline void parse_mesh(const json& j, MeshConfig& m, const std::filesystem::path& base) {
  Reader r(j, "/mesh");
  std::string type = "plate";
  r.string("type", type);
  if (type == "plate") {
    m.kind = MeshKind::Plate;
    r.number("L", m.L);
    r.number("aspect", m.aspect);
    r.integer("nx", m.nx);
    r.integer("ny", m.ny);
    if (!(m.L > 0.0)) throw ConfigError("/mesh/L", "must be > 0");
    if (!(m.aspect > 0.0)) throw ConfigError("/mesh/aspect", "must be > 0");
    if (m.nx < 1) throw ConfigError("/mesh/nx", "must be >= 1");
    if (m.ny < 1) throw ConfigError("/mesh/ny", "must be >= 1");
  } else if (type == "sphere") {
    m.kind = MeshKind::Sphere;
    r.integer("subdiv", m.subdiv);
    r.number("R", m.R);
    if (m.subdiv < 0 || m.subdiv > 6) throw ConfigError("/mesh/subdiv", "must be in [0, 6]");
    if (!(m.R > 0.0)) throw ConfigError("/mesh/R", "must be > 0");
  } else if (type == "file") {
    m.kind = MeshKind::File;
    r.string("path", m.path);
    if (m.path.empty()) throw ConfigError("/mesh/path", "a mesh file path is required");
    m.path = resolve(m.path, base);
  } else {
    throw ConfigError("/mesh/type", "expected \"plate\", \"sphere\" or \"file\"");
  }
  r.finish();
}

inline void parse_feeds(const json& j, FeedConfig& f) {
  Reader r(j, "/feeds");
  std::string type = "auto";
  r.string("type", type);
  r.number("phase_deg", f.phase_deg);
  if (type == "auto") {
    f.kind = FeedKind::Auto;
  } else if (type == "points") {
    f.kind = FeedKind::Points;
    const json* pts = r.raw("points");
    if (!pts || !pts->is_array() || pts->empty()) throw ConfigError("/feeds/points", "expected a non-empty array");
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const std::string ptr = "/feeds/points/" + std::to_string(i);
      Reader p((*pts)[i], ptr);
      FeedPoint fp;
      const json* at = p.raw("at");
      const json* dir = p.raw("direction");
      if (!at) throw ConfigError(ptr + "/at", "missing feed position");
      if (!dir) throw ConfigError(ptr + "/direction", "missing feed direction");
      fp.point = vec3(*at, ptr + "/at");
      fp.direction = vec3(*dir, ptr + "/direction");
      if (!(fp.direction.norm() > 0.0)) throw ConfigError(ptr + "/direction", "must be non-zero");
      double re = 1.0, im = 0.0;
      p.number("voltage_re", re);
      p.number("voltage_im", im);
      fp.voltage = cplx(re, im);
      p.finish();
      f.points.push_back(fp);
    }
  } else {
    throw ConfigError("/feeds/type", "expected \"auto\" or \"points\"");
  }
  r.finish();
}

inline void parse_seed(const json& j, RunConfig& c, const std::filesystem::path& base) {
  Reader r(j, "/optimization/seed");
  std::string mode = "uniform";
  r.string("mode", mode);
  SeedSpec& s = c.opt.seed;
  if (mode == "uniform") {
    s.mode = SeedMode::Uniform;
    if (r.has("value")) {
      s.mode = SeedMode::UniformValue;
      r.number("value", s.value);
      if (!(s.value >= 0.0 && s.value <= 1.0)) throw ConfigError("/optimization/seed/value", "must be in [0, 1]");
    }
  } else if (mode == "random") {
    s.mode = SeedMode::Random;
    r.integer("seed", s.seed);
  } else if (mode == "file") {
    s.mode = SeedMode::FromFile;
    r.string("path", c.seed_path);
    if (c.seed_path.empty()) throw ConfigError("/optimization/seed/path", "a design file path is required");
    c.seed_path = resolve(c.seed_path, base);
  } else {
    throw ConfigError("/optimization/seed/mode", "expected \"uniform\", \"random\" or \"file\"");
  }
  r.finish();
}

inline void parse_optimization(const json& j, RunConfig& c, const std::filesystem::path& base) {
  Reader r(j, "/optimization");
  OptConfig& o = c.opt;
  r.number("ka", o.ka);
  r.number("Sf", o.Sf);
  r.number("Rmin", o.Rmin);
  r.integer("I_max", o.I_max);
  r.number("delta_rho_max", o.delta_rho_max);
  r.number("beta0", o.beta0);
  r.number("beta_max", o.beta_max);
  r.number("eta", o.eta);
  r.number("p", o.interpolation.p);
  r.number("omega_lo", o.interpolation.omega_lo);
  r.number("omega_hi", o.interpolation.omega_hi);
  r.number("move", o.mma.move);
  r.number("asyinit", o.mma.asyinit);
  r.number("asyincr", o.mma.asyincr);
  r.number("asydecr", o.mma.asydecr);
  r.number("mma_c", o.mma_c);
  r.number("mma_d", o.mma_d);
  r.integer("snapshot_stride", o.snapshot_stride);
  r.boolean("reset_mma_on_beta", o.reset_mma_on_beta);
  std::string qref;
  r.string("qref", qref);
  if (qref == "beta") o.qref = QrefMode::PerBeta;
  else if (qref == "iteration") o.qref = QrefMode::PerIteration;
  else if (!qref.empty() && qref != "initial") throw ConfigError("/optimization/qref", "must be initial, beta or iteration");
  r.boolean("periodic_doubling_at_first", o.periodic_doubling_at_first);
  if (const json* s = r.raw("seed")) parse_seed(*s, c, base);
  r.finish();
  if (!(o.mma.move > 0.0 && o.mma.move <= 1.0)) throw ConfigError("/optimization/move", "must be in (0, 1]");
  try {
    o.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("/optimization", ex.what());
  }
}

inline void parse_output(const json& j, OutputConfig& o, const std::filesystem::path& base) {
  Reader r(j, "/output");
  r.string("dir", o.dir);
  r.string("prefix", o.prefix);
  r.finish();
  if (o.prefix.empty() || o.prefix.find('/') != std::string::npos)
    throw ConfigError("/output/prefix", "must be a non-empty file name prefix");
  o.dir = resolve(o.dir, base);
}

inline void parse_gradcheck(const json& j, GradcheckConfig& g) {
  Reader r(j, "/gradcheck");
  r.integer("seed", g.seed);
  r.number("rho_lo", g.rho_lo);
  r.number("rho_hi", g.rho_hi);
  r.number("beta", g.beta);
  r.number("h", g.h);
  r.number("tol", g.tol);
  r.integer("max_triangles", g.max_triangles);
  r.finish();
  if (!(g.rho_lo >= 0.0 && g.rho_lo < g.rho_hi && g.rho_hi <= 1.0))
    throw ConfigError("/gradcheck", "require 0 <= rho_lo < rho_hi <= 1");
  if (!(g.beta > 0.0)) throw ConfigError("/gradcheck/beta", "must be > 0");
  if (!(g.h > 0.0 && g.h < 0.1)) throw ConfigError("/gradcheck/h", "must be in (0, 0.1)");
  if (!(g.tol > 0.0)) throw ConfigError("/gradcheck/tol", "must be > 0");
}

}  // namespace detail

/// Parses a configuration object. Relative paths resolve against `base`.
inline RunConfig parse_config(const json& j, const std::filesystem::path& base = ".") {
  RunConfig c;
  detail::Reader r(j, "");
  if (const json* v = r.raw("mesh")) detail::parse_mesh(*v, c.mesh, base);
  if (const json* v = r.raw("feeds")) detail::parse_feeds(*v, c.feeds);
  if (const json* v = r.raw("optimization")) detail::parse_optimization(*v, c, base);
  if (const json* v = r.raw("output")) detail::parse_output(*v, c.output, base);
  else c.output.dir = detail::resolve(c.output.dir, base);
  if (const json* v = r.raw("gradcheck")) detail::parse_gradcheck(*v, c.gradcheck);
  if (const json* v = r.raw("threads")) {
    if (!v->is_number_integer() || v->get<long long>() < 1) throw ConfigError("/threads", "expected a positive integer");
    c.threads = v->get<int>();
  }
  r.finish();
  if (c.feeds.kind == FeedKind::Auto && c.mesh.kind == MeshKind::File)
    throw ConfigError("/feeds/type", "automatic feeds need a generated mesh; use \"points\" for mesh files");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("", "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& ex) {
    throw ConfigError("", std::string("invalid JSON in '") + path + "': " + ex.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Input files must exist and the output directory must be creatable.
inline void validate_paths(const RunConfig& c, bool needs_output) {
  namespace fs = std::filesystem;
  if (c.mesh.kind == MeshKind::File && !fs::is_regular_file(c.mesh.path))
    throw ConfigError("/mesh/path", "mesh file '" + c.mesh.path + "' does not exist");
  if (c.opt.seed.mode == SeedMode::FromFile && !fs::is_regular_file(c.seed_path))
    throw ConfigError("/optimization/seed/path", "design file '" + c.seed_path + "' does not exist");
  if (!needs_output) return;
  std::error_code ec;
  fs::create_directories(c.output.dir, ec);
  if (ec || !fs::is_directory(c.output.dir))
    throw ConfigError("/output/dir", "cannot create output directory '" + c.output.dir + "'");
}

/// `threads` from the config, else MOMTOPT_THREADS, else 0 (library default).
inline int resolve_threads(const RunConfig& c) {
  if (c.threads) return *c.threads;
  if (const char* env = std::getenv("MOMTOPT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ConfigError("", "MOMTOPT_THREADS must be a positive integer");
  }
  return 0;
}

struct Problem {
  TriMesh mesh;
  BasisSet basis;
  FeedSpec feeds;
};

inline TriMesh build_mesh(const MeshConfig& m) {
  switch (m.kind) {
    case MeshKind::Plate:
      return generate_plate(m.L, m.aspect, m.nx, m.ny);
    case MeshKind::Sphere:
      return generate_sphere(m.subdiv, m.R);
    case MeshKind::File:
      break;
  }
  return load_mesh(m.path);
}

inline FeedSpec build_feeds(const RunConfig& c, const TriMesh& mesh, const BasisSet& basis) {
  if (c.feeds.kind == FeedKind::Points) {
    FeedSpec f;
    for (const auto& p : c.feeds.points) {
      const FeedLocation loc = locate_feed(mesh, basis, p.point, p.direction);
      f.edges.push_back(loc.edge);
      f.voltages.push_back(p.voltage * loc.sign);
    }
    return f;
  }
  if (c.mesh.kind == MeshKind::Plate) return plate_feed(mesh, basis, c.mesh.L, c.mesh.aspect, c.mesh.nx, c.mesh.ny);
  return sphere_feeds(mesh, basis, c.mesh.R, std::polar(1.0, c.feeds.phase_deg * pi / 180.0));
}

inline Problem build_problem(const RunConfig& c) {
  Problem p{build_mesh(c.mesh), {}, {}};
  p.basis = build_rwg(p.mesh);
  p.feeds = build_feeds(c, p.mesh, p.basis);
  return p;
}

}  // namespace momtopt::cli
