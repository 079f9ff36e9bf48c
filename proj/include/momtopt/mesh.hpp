#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"

namespace momtopt {

/// Mesh edge with up to two adjacent triangles. `tri_count` > 2 marks a non-manifold edge.
struct Edge {
  std::array<int, 2> v{-1, -1};
  std::array<int, 2> tri{-1, -1};
  int tri_count = 0;

  bool is_boundary() const { return tri_count == 1; }
  bool is_inner() const { return tri_count == 2; }
};

/// Triangulated surface. Immutable once built through TriMesh::build.
///
/// Local edge i of a triangle is the edge opposite its local vertex i, so the
/// RWG free vertex on a triangle is the vertex with the same local index.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> areas;
  std::vector<Vec3> centroids;
  std::vector<Vec3> normals;
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> triangle_edges;
  /// Radius of the circumscribing sphere (about the bounding-box center).
  double a = 0.0;
  Vec3 center = Vec3::Zero();

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  std::size_t edge_count() const { return edges.size(); }

  std::size_t boundary_edge_count() const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.is_boundary(); }));
  }

  double total_area() const {
    double s = 0.0;
    for (double x : areas) s += x;
    return s;
  }

  double mean_edge_length() const {
    if (edges.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : edges) s += (vertices[e.v[1]] - vertices[e.v[0]]).norm();
    return s / static_cast<double>(edges.size());
  }

  double edge_length(int e) const { return (vertices[edges[e].v[1]] - vertices[edges[e].v[0]]).norm(); }

  Vec3 edge_midpoint(int e) const { return 0.5 * (vertices[edges[e].v[0]] + vertices[edges[e].v[1]]); }

  /// Computes areas, centroids, normals, edge adjacency and `a`; validates triangle shapes.
  static TriMesh build(std::vector<Vec3> verts, std::vector<std::array<int, 3>> tris) {
    TriMesh m;
    m.vertices = std::move(verts);
    m.triangles = std::move(tris);
    const int nv = static_cast<int>(m.vertices.size());
    if (m.triangles.empty()) throw StructuralError("mesh has no triangles");

    Vec3 lo = m.vertices.front(), hi = m.vertices.front();
    for (const auto& p : m.vertices) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    m.center = 0.5 * (lo + hi);
    for (const auto& p : m.vertices) m.a = std::max(m.a, (p - m.center).norm());

    const std::size_t nt = m.triangles.size();
    m.areas.resize(nt);
    m.centroids.resize(nt);
    m.normals.resize(nt);
    m.triangle_edges.resize(nt);
    const double min_area = 1e-12 * m.a * m.a;

    std::unordered_map<std::uint64_t, int> edge_index;
    edge_index.reserve(3 * nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& tri = m.triangles[t];
      for (int idx : tri) {
        if (idx < 0 || idx >= nv) throw StructuralError("triangle " + std::to_string(t) + " has vertex index out of range");
      }
      const Vec3& p0 = m.vertices[tri[0]];
      const Vec3& p1 = m.vertices[tri[1]];
      const Vec3& p2 = m.vertices[tri[2]];
      const Vec3 cr = (p1 - p0).cross(p2 - p0);
      const double area = 0.5 * cr.norm();
      if (!(area > min_area)) throw StructuralError("triangle " + std::to_string(t) + " is degenerate");
      m.areas[t] = area;
      m.centroids[t] = (p0 + p1 + p2) / 3.0;
      m.normals[t] = cr / cr.norm();

      for (int i = 0; i < 3; ++i) {
        int va = tri[(i + 1) % 3];
        int vb = tri[(i + 2) % 3];
        if (va > vb) std::swap(va, vb);
        const std::uint64_t key = (static_cast<std::uint64_t>(va) << 32) | static_cast<std::uint32_t>(vb);
        auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(m.edges.size()));
        if (inserted) m.edges.push_back(Edge{{va, vb}, {-1, -1}, 0});
        Edge& e = m.edges[it->second];
        if (e.tri_count < 2) e.tri[e.tri_count] = static_cast<int>(t);
        ++e.tri_count;
        m.triangle_edges[t][i] = it->second;
      }
    }
    return m;
  }

  /// Mesh restricted to the triangles with keep[t] != 0; vertices are compacted in order.
  TriMesh submesh(std::span<const char> keep, std::vector<int>* triangle_map = nullptr) const {
    if (keep.size() != triangles.size()) throw std::invalid_argument("submesh mask length mismatch");
    std::vector<int> vmap(vertices.size(), -1);
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    if (triangle_map) triangle_map->clear();
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      if (!keep[t]) continue;
      std::array<int, 3> nt{};
      for (int i = 0; i < 3; ++i) {
        int& slot = vmap[triangles[t][i]];
        if (slot < 0) {
          slot = static_cast<int>(verts.size());
          verts.push_back(vertices[triangles[t][i]]);
        }
        nt[i] = slot;
      }
      tris.push_back(nt);
      if (triangle_map) triangle_map->push_back(static_cast<int>(t));
    }
    return build(std::move(verts), std::move(tris));
  }
};

/// Structured rectangular plate of size L x (aspect*L) centered at the origin in
/// the z = 0 plane. Each of the nx*ny cells is split into 4 triangles through
/// its center point, so T = 4*nx*ny.
inline TriMesh generate_plate(double L, double aspect, int nx, int ny) {
  if (!(L > 0.0) || !(aspect > 0.0)) throw std::invalid_argument("plate dimensions must be positive");
  if (nx < 1 || ny < 1) throw std::invalid_argument("plate cell counts must be >= 1");
  const double W = aspect * L;
  const double dx = L / nx, dy = W / ny;
  const double x0 = -0.5 * L, y0 = -0.5 * W;

  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) + nx * ny));
  auto grid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) verts.emplace_back(x0 + i * dx, y0 + j * dy, 0.0);
  const int center_base = static_cast<int>(verts.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) verts.emplace_back(x0 + (i + 0.5) * dx, y0 + (j + 0.5) * dy, 0.0);

  std::vector<std::array<int, 3>> tris;
  tris.reserve(static_cast<std::size_t>(4 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = center_base + j * nx + i;
      const int v00 = grid(i, j), v10 = grid(i + 1, j), v11 = grid(i + 1, j + 1), v01 = grid(i, j + 1);
      tris.push_back({v00, v10, c});  // bottom
      tris.push_back({v10, v11, c});  // right
      tris.push_back({v11, v01, c});  // top
      tris.push_back({v01, v00, c});  // left
    }
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

/// Geodesic sphere: icosahedron subdivided `subdivisions` times, vertices
/// projected to radius R. T = 20 * 4^subdivisions.
inline TriMesh generate_sphere(int subdivisions, double R) {
  if (subdivisions < 0) throw std::invalid_argument("subdivisions must be >= 0");
  if (!(R > 0.0)) throw std::invalid_argument("sphere radius must be positive");
  const double t = std::numbers::phi;
  std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const int idx = static_cast<int>(verts.size());
      verts.push_back((verts[i] + verts[j]).normalized());
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& f : tris) {
      const int a = midpoint(f[0], f[1]);
      const int b = midpoint(f[1], f[2]);
      const int c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    tris = std::move(next);
  }

  for (auto& v : verts) v *= R;
  // outward orientation
  for (auto& f : tris) {
    const Vec3 n = (verts[f[1]] - verts[f[0]]).cross(verts[f[2]] - verts[f[0]]);
    if (n.dot(verts[f[0]] + verts[f[1]] + verts[f[2]]) < 0.0) std::swap(f[1], f[2]);
  }
  return TriMesh::build(std::move(verts), std::move(tris));
}

/// RWG function attached to an inner edge. Current flows from the plus to the minus triangle.
struct RwgFunction {
  int edge = -1;
  int tri_plus = -1;
  int tri_minus = -1;
  double length = 0.0;
  int free_plus = -1;   // vertex index opposite the edge in tri_plus
  int free_minus = -1;  // vertex index opposite the edge in tri_minus
};

/// A basis function seen from one of its two triangles.
struct LocalBasis {
  int index = -1;       // basis function index, -1 if the local edge carries none
  double sign = 0.0;    // +1 on the plus triangle, -1 on the minus triangle
  int free_vertex = -1;
};

struct BasisSet {
  std::vector<RwgFunction> functions;
  /// support[t][i]: basis function on local edge i of triangle t.
  std::vector<std::array<LocalBasis, 3>> support;
  /// Basis index per mesh edge, -1 for edges without one.
  std::vector<int> edge_to_function;

  std::size_t N() const { return functions.size(); }
  std::size_t size() const { return functions.size(); }
};

namespace detail {

inline int local_edge_slot(const TriMesh& mesh, int tri, int edge) {
  for (int i = 0; i < 3; ++i)
    if (mesh.triangle_edges[tri][i] == edge) return i;
  throw StructuralError("edge is not adjacent to triangle");
}

inline void fill_support(const TriMesh& mesh, BasisSet& basis) {
  basis.support.assign(mesh.triangle_count(), {});
  basis.edge_to_function.assign(mesh.edge_count(), -1);
  for (std::size_t n = 0; n < basis.functions.size(); ++n) {
    const auto& f = basis.functions[n];
    basis.edge_to_function[f.edge] = static_cast<int>(n);
    const int sp = local_edge_slot(mesh, f.tri_plus, f.edge);
    const int sm = local_edge_slot(mesh, f.tri_minus, f.edge);
    basis.support[f.tri_plus][sp] = LocalBasis{static_cast<int>(n), 1.0, f.free_plus};
    basis.support[f.tri_minus][sm] = LocalBasis{static_cast<int>(n), -1.0, f.free_minus};
  }
}

}  // namespace detail

/// One RWG function per inner edge, ordered by edge index; plus triangle is the lower triangle index.
inline BasisSet build_rwg(const TriMesh& mesh) {
  BasisSet basis;
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const Edge& edge = mesh.edges[e];
    if (edge.tri_count > 2)
      throw StructuralError("non-manifold edge " + std::to_string(e) + " with " + std::to_string(edge.tri_count) +
                            " triangles");
    if (edge.tri_count != 2) continue;
    RwgFunction f;
    f.edge = static_cast<int>(e);
    f.tri_plus = std::min(edge.tri[0], edge.tri[1]);
    f.tri_minus = std::max(edge.tri[0], edge.tri[1]);
    if (f.tri_plus == f.tri_minus) throw StructuralError("edge " + std::to_string(e) + " repeats a triangle");
    f.length = mesh.edge_length(static_cast<int>(e));
    f.free_plus = mesh.triangles[f.tri_plus][detail::local_edge_slot(mesh, f.tri_plus, f.edge)];
    f.free_minus = mesh.triangles[f.tri_minus][detail::local_edge_slot(mesh, f.tri_minus, f.edge)];
    basis.functions.push_back(f);
  }
  detail::fill_support(mesh, basis);
  return basis;
}

/// Subset of an existing basis (keeps the relative order of `keep_indices`).
inline BasisSet restrict_basis(const TriMesh& mesh, const BasisSet& full, std::span<const int> keep_indices) {
  BasisSet basis;
  basis.functions.reserve(keep_indices.size());
  for (int n : keep_indices) basis.functions.push_back(full.functions.at(static_cast<std::size_t>(n)));
  detail::fill_support(mesh, basis);
  return basis;
}

/// Filter neighborhoods B_t = { j : |r_t - r_j| <= Rmin } over triangle centroids,
/// found through a uniform bucket grid with cell size Rmin. Each list is sorted.
inline std::vector<std::vector<int>> neighborhoods(const TriMesh& mesh, double Rmin) {
  if (!(Rmin >= 0.0)) throw std::invalid_argument("Rmin must be non-negative");
  const int nt = static_cast<int>(mesh.triangle_count());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(nt));
  if (Rmin == 0.0) {
    for (int t = 0; t < nt; ++t) out[t].push_back(t);
    return out;
  }
  Vec3 lo = mesh.centroids.front();
  for (const auto& c : mesh.centroids) lo = lo.cwiseMin(c);
  auto cell_of = [&](const Vec3& p) {
    return std::array<long, 3>{static_cast<long>(std::floor((p.x() - lo.x()) / Rmin)),
                               static_cast<long>(std::floor((p.y() - lo.y()) / Rmin)),
                               static_cast<long>(std::floor((p.z() - lo.z()) / Rmin))};
  };
  struct Hash {
    std::size_t operator()(const std::array<long, 3>& k) const {
      return static_cast<std::size_t>(k[0] * 73856093L ^ k[1] * 19349663L ^ k[2] * 83492791L);
    }
  };
  std::unordered_map<std::array<long, 3>, std::vector<int>, Hash> buckets;
  for (int t = 0; t < nt; ++t) buckets[cell_of(mesh.centroids[t])].push_back(t);

  for (int t = 0; t < nt; ++t) {
    const auto c = cell_of(mesh.centroids[t]);
    auto& list = out[t];
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = buckets.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == buckets.end()) continue;
          for (int j : it->second)
            if ((mesh.centroids[t] - mesh.centroids[j]).norm() <= Rmin) list.push_back(j);
        }
    std::sort(list.begin(), list.end());
  }
  return out;
}

}  // namespace momtopt
