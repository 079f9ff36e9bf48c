#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include "em_operators.hpp"
#include "mesh.hpp"

namespace momtopt {

/// FNV-1a over the vertex coordinates and triangle indices.
inline std::uint64_t mesh_hash(const TriMesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& v : mesh.vertices) feed(v.data(), 3 * sizeof(double));
  for (const auto& t : mesh.triangles) feed(t.data(), 3 * sizeof(int));
  return h;
}

// Layout (little-endian): magic "MTOPCACH", u32 version, u64 N, u64 T, f64 k,
// f64 fd_step, u64 mesh hash, u32 tag length, tag bytes, then Z0 as N*N
// complex doubles and dX0/domega as N*N doubles, both column-major.
namespace detail {
inline constexpr char cache_magic[8] = {'M', 'T', 'O', 'P', 'C', 'A', 'C', 'H'};
inline constexpr std::uint32_t cache_version = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof v));
}
}  // namespace detail

static_assert(std::endian::native == std::endian::little, "operator cache assumes a little-endian host");

inline void save_operator_cache(const std::string& path, const TriMesh& mesh, const OperatorSet& ops,
                                const OperatorOptions& opts) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open cache '" + path + "' for writing");
  const std::string tag = opts.quadrature.tag();
  f.write(detail::cache_magic, 8);
  detail::put(f, detail::cache_version);
  detail::put(f, static_cast<std::uint64_t>(ops.Z0.rows()));
  detail::put(f, static_cast<std::uint64_t>(mesh.triangle_count()));
  detail::put(f, ops.k);
  detail::put(f, opts.fd_step);
  detail::put(f, mesh_hash(mesh));
  detail::put(f, static_cast<std::uint32_t>(tag.size()));
  f.write(tag.data(), static_cast<std::streamsize>(tag.size()));
  f.write(reinterpret_cast<const char*>(ops.Z0.data()), static_cast<std::streamsize>(ops.Z0.size() * sizeof(cplx)));
  f.write(reinterpret_cast<const char*>(ops.dX0_domega.data()),
          static_cast<std::streamsize>(ops.dX0_domega.size() * sizeof(double)));
  if (!f) throw FormatError("write to cache '" + path + "' failed");
}

/// Returns the cached operators if the file matches mesh, basis size, k and
/// quadrature; std::nullopt on any mismatch or a missing file.
inline std::optional<OperatorSet> load_operator_cache(const std::string& path, const TriMesh& mesh, const BasisSet& basis,
                                                      double k, const FeedSpec& feeds, const OperatorOptions& opts) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, detail::cache_magic, 8) != 0) return std::nullopt;
  std::uint32_t version = 0, tag_len = 0;
  std::uint64_t N = 0, T = 0, hash = 0;
  double kk = 0.0, h = 0.0;
  if (!detail::get(f, version) || version != detail::cache_version) return std::nullopt;
  if (!detail::get(f, N) || !detail::get(f, T) || !detail::get(f, kk) || !detail::get(f, h) || !detail::get(f, hash) ||
      !detail::get(f, tag_len))
    return std::nullopt;
  if (N != basis.N() || T != mesh.triangle_count() || kk != k || h != opts.fd_step || hash != mesh_hash(mesh))
    return std::nullopt;
  std::string tag(tag_len, '\0');
  if (!f.read(tag.data(), tag_len) || tag != opts.quadrature.tag()) return std::nullopt;

  OperatorSet ops;
  const auto n = static_cast<Eigen::Index>(N);
  ops.Z0.resize(n, n);
  ops.dX0_domega.resize(n, n);
  if (!f.read(reinterpret_cast<char*>(ops.Z0.data()), static_cast<std::streamsize>(ops.Z0.size() * sizeof(cplx))))
    return std::nullopt;
  if (!f.read(reinterpret_cast<char*>(ops.dX0_domega.data()),
              static_cast<std::streamsize>(ops.dX0_domega.size() * sizeof(double))))
    return std::nullopt;
  ops.k = k;
  ops.omega = k * c0;
  ops.R0 = ops.Z0.real();
  ops.X0 = ops.Z0.imag();
  std::tie(ops.Xe, ops.Xm) = stored_energy_matrices(ops.X0, ops.dX0_domega, ops.omega);
  ops.psi = assemble_material_elements(mesh, basis);
  ops.V = delta_gap_excitation(basis, feeds);
  return ops;
}

}  // namespace momtopt
