#include "asfem/mesh.hpp"

#include "asfem/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <string>
#include <unordered_map>

namespace asfem {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double cross(const Point& a, const Point& b) { return a[0] * b[1] - a[1] * b[0]; }

} // namespace

TriangleMesh::TriangleMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
                           std::vector<int> regions, std::vector<BoundarySegment> boundary,
                           std::vector<int> parents)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)), regions_(std::move(regions)),
      parents_(std::move(parents)), declared_boundary_(std::move(boundary)) {
  const int nv = num_vertices();
  const int nt = num_triangles();
  if (regions_.empty()) regions_.assign(static_cast<std::size_t>(nt), 0);
  if (static_cast<int>(regions_.size()) != nt) throw InvalidArgument("TriangleMesh: region count mismatch");
  if (parents_.empty()) parents_.assign(static_cast<std::size_t>(nt), -1);
  if (static_cast<int>(parents_.size()) != nt) throw InvalidArgument("TriangleMesh: parent count mismatch");
  for (const auto& tri : triangles_)
    for (int v : tri)
      if (v < 0 || v >= nv) throw InvalidArgument("TriangleMesh: triangle vertex index out of range");

  std::unordered_map<std::uint64_t, int> edge_ids;
  edge_ids.reserve(static_cast<std::size_t>(3 * nt));
  triangle_edges_.resize(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i) {
      const int a = tri[(i + 1) % 3], b = tri[(i + 2) % 3];
      if (a == b) throw InvariantViolation("conformity: degenerate triangle with repeated vertex");
      auto [it, inserted] = edge_ids.try_emplace(edge_key(a, b), num_edges());
      if (inserted) {
        edges_.push_back({{std::min(a, b), std::max(a, b)}, {t, -1}});
      } else {
        MeshEdge& edge = edges_[static_cast<std::size_t>(it->second)];
        if (edge.triangles[1] >= 0)
          throw InvariantViolation("conformity: edge (" + std::to_string(edge.vertices[0]) + ", " +
                                   std::to_string(edge.vertices[1]) + ") shared by more than two triangles");
        edge.triangles[1] = t;
      }
      triangle_edges_[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = it->second;
    }
  }

  edge_markers_.assign(edges_.size(), -1);
  boundary_vertex_.assign(static_cast<std::size_t>(nv), 0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (!edges_[e].is_boundary()) continue;
    edge_markers_[e] = 1;
    boundary_vertex_[static_cast<std::size_t>(edges_[e].vertices[0])] = 1;
    boundary_vertex_[static_cast<std::size_t>(edges_[e].vertices[1])] = 1;
  }
  for (const auto& seg : declared_boundary_) {
    const auto it = edge_ids.find(edge_key(seg.vertices[0], seg.vertices[1]));
    if (it != edge_ids.end() && edges_[static_cast<std::size_t>(it->second)].is_boundary())
      edge_markers_[static_cast<std::size_t>(it->second)] = seg.marker;
  }

  vertex_triangle_offsets_.assign(static_cast<std::size_t>(nv) + 1, 0);
  for (const auto& tri : triangles_)
    for (int v : tri) ++vertex_triangle_offsets_[static_cast<std::size_t>(v) + 1];
  for (int v = 0; v < nv; ++v)
    vertex_triangle_offsets_[static_cast<std::size_t>(v) + 1] += vertex_triangle_offsets_[static_cast<std::size_t>(v)];
  vertex_triangle_list_.resize(static_cast<std::size_t>(3 * nt));
  std::vector<int> fill(vertex_triangle_offsets_.begin(), vertex_triangle_offsets_.end() - 1);
  for (int t = 0; t < nt; ++t)
    for (int v : triangles_[static_cast<std::size_t>(t)])
      vertex_triangle_list_[static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = t;
}

std::span<const int> TriangleMesh::vertex_triangles(int v) const {
  const auto begin = static_cast<std::size_t>(vertex_triangle_offsets_[static_cast<std::size_t>(v)]);
  const auto end = static_cast<std::size_t>(vertex_triangle_offsets_[static_cast<std::size_t>(v) + 1]);
  return std::span<const int>(vertex_triangle_list_).subspan(begin, end - begin);
}

std::vector<BoundarySegment> TriangleMesh::boundary_segments() const {
  std::vector<BoundarySegment> out;
  for (int e = 0; e < num_edges(); ++e) {
    const MeshEdge& edge = edges_[static_cast<std::size_t>(e)];
    if (!edge.is_boundary()) continue;
    // orient along the counter-clockwise boundary of the owning triangle
    const auto& tri = triangle(edge.triangles[0]);
    const auto& te = triangle_edges(edge.triangles[0]);
    const int i = static_cast<int>(std::find(te.begin(), te.end(), e) - te.begin());
    out.push_back({{tri[(i + 1) % 3], tri[(i + 2) % 3]}, edge_marker(e)});
  }
  return out;
}

double TriangleMesh::signed_area(int t) const {
  const auto& tri = triangle(t);
  return 0.5 * cross(vertex(tri[1]) - vertex(tri[0]), vertex(tri[2]) - vertex(tri[0]));
}

double TriangleMesh::diameter(int t) const {
  const auto& tri = triangle(t);
  return std::max({(vertex(tri[0]) - vertex(tri[1])).norm(), (vertex(tri[1]) - vertex(tri[2])).norm(),
                   (vertex(tri[2]) - vertex(tri[0])).norm()});
}

double TriangleMesh::edge_length(int e) const {
  const MeshEdge& edge = this->edge(e);
  return (vertex(edge.vertices[0]) - vertex(edge.vertices[1])).norm();
}

Point TriangleMesh::centroid(int t) const {
  const auto& tri = triangle(t);
  return (vertex(tri[0]) + vertex(tri[1]) + vertex(tri[2])) / 3.0;
}

void TriangleMesh::validate() const {
  for (int t = 0; t < num_triangles(); ++t) {
    if (!(signed_area(t) > 0.0))
      throw InvariantViolation("orientation: triangle " + std::to_string(t) + " has non-positive signed area");
  }

  // Declared boundary segments must be exactly the edges owned by one triangle.
  if (!declared_boundary_.empty()) {
    int nb = 0;
    for (const auto& e : edges_) nb += e.is_boundary() ? 1 : 0;
    std::unordered_map<std::uint64_t, int> boundary_edges;
    for (int e = 0; e < num_edges(); ++e)
      if (edge(e).is_boundary()) boundary_edges.emplace(edge_key(edge(e).vertices[0], edge(e).vertices[1]), e);
    for (const auto& seg : declared_boundary_) {
      if (!boundary_edges.contains(edge_key(seg.vertices[0], seg.vertices[1])))
        throw InvariantViolation("conformity: declared boundary segment (" + std::to_string(seg.vertices[0]) + ", " +
                                 std::to_string(seg.vertices[1]) + ") is not a boundary edge of the triangulation");
    }
    if (static_cast<int>(declared_boundary_.size()) != nb)
      throw InvariantViolation("conformity: " + std::to_string(nb) + " edges are owned by a single triangle but " +
                               std::to_string(declared_boundary_.size()) + " boundary segments are declared");
  }

  // Hanging nodes: a boundary-edge vertex lying inside another boundary edge.
  std::vector<int> bverts;
  for (int v = 0; v < num_vertices(); ++v)
    if (is_boundary_vertex(v)) bverts.push_back(v);
  for (int e = 0; e < num_edges(); ++e) {
    const MeshEdge& edge = this->edge(e);
    if (!edge.is_boundary()) continue;
    const Point& a = vertex(edge.vertices[0]);
    const Point& b = vertex(edge.vertices[1]);
    const Point d = b - a;
    const double len2 = d.squaredNorm();
    const Point lo = a.cwiseMin(b), hi = a.cwiseMax(b);
    for (int v : bverts) {
      if (v == edge.vertices[0] || v == edge.vertices[1]) continue;
      const Point& x = vertex(v);
      if ((x.array() < lo.array() - 1e-12).any() || (x.array() > hi.array() + 1e-12).any()) continue;
      const double s = (x - a).dot(d) / len2;
      if (s <= 1e-12 || s >= 1.0 - 1e-12) continue;
      if (std::abs(cross(d, x - a)) <= 1e-12 * len2)
        throw InvariantViolation("conformity: hanging node " + std::to_string(v) + " on edge (" +
                                 std::to_string(edge.vertices[0]) + ", " + std::to_string(edge.vertices[1]) + ")");
    }
  }
}

Domain parse_domain(std::string_view name) {
  if (name == "unit_square") return Domain::unit_square;
  if (name == "l_shape") return Domain::l_shape;
  if (name == "checkerboard_square") return Domain::checkerboard_square;
  throw InvalidArgument("unknown domain '" + std::string(name) + "'");
}

std::string_view to_string(Domain domain) {
  switch (domain) {
  case Domain::unit_square: return "unit_square";
  case Domain::l_shape: return "l_shape";
  case Domain::checkerboard_square: return "checkerboard_square";
  }
  return "unknown";
}

std::vector<std::array<int, 3>> longest_edge_labeling(const std::vector<Point>& vertices,
                                                      std::vector<std::array<int, 3>> triangles) {
  for (auto& tri : triangles) {
    int best = 0;
    double best_len = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double len = (vertices[static_cast<std::size_t>(tri[(i + 1) % 3])] -
                          vertices[static_cast<std::size_t>(tri[(i + 2) % 3])]).norm();
      const bool longer = len > best_len * (1.0 + 1e-12);
      const bool tie = !longer && len >= best_len * (1.0 - 1e-12);
      if (longer || (tie && tri[i] < tri[best])) {
        best = i;
        best_len = std::max(len, best_len);
      }
    }
    std::rotate(tri.begin(), tri.begin() + best, tri.end());
  }
  return triangles;
}

TriangleMesh builtin_mesh(Domain domain, int n0) {
  if (n0 < 1) throw InvalidArgument("builtin_mesh: n0 must be >= 1");

  double x0 = 0.0, y0 = 0.0, h = 1.0 / n0;
  int cells = n0;
  if (domain == Domain::l_shape) {
    x0 = y0 = -1.0;
    cells = 2 * n0;
  } else if (domain == Domain::checkerboard_square) {
    cells = 2 * n0;
    h = 1.0 / cells;
  }
  const auto cell_present = [&](int i, int j) {
    if (domain != Domain::l_shape) return true;
    return !(i >= n0 && j < n0); // drop the quadrant [0,1) x (-1,0]
  };

  std::vector<int> index(static_cast<std::size_t>((cells + 1) * (cells + 1)), -1);
  std::vector<Point> vertices;
  const auto vid = [&](int i, int j) -> int& { return index[static_cast<std::size_t>(j * (cells + 1) + i)]; };
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) {
      bool used = false;
      for (int dj = -1; dj <= 0; ++dj)
        for (int di = -1; di <= 0; ++di) {
          const int ci = i + di, cj = j + dj;
          if (ci >= 0 && cj >= 0 && ci < cells && cj < cells && cell_present(ci, cj)) used = true;
        }
      if (!used) continue;
      vid(i, j) = static_cast<int>(vertices.size());
      vertices.emplace_back(x0 + i * h, y0 + j * h);
    }
  }
  // exact endpoints despite h rounding
  for (auto& v : vertices)
    for (int c = 0; c < 2; ++c) {
      const double r = std::round(v[c] * cells) / cells;
      if (std::abs(v[c] - r) < 1e-14) v[c] = r;
    }

  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      if (!cell_present(i, j)) continue;
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      int region = 0;
      if (domain == Domain::checkerboard_square) region = (2 * i >= cells ? 1 : 0) + (2 * j >= cells ? 2 : 0);
      triangles.push_back({a, b, c});
      triangles.push_back({a, c, d});
      regions.push_back(region);
      regions.push_back(region);
    }
  }
  triangles = longest_edge_labeling(vertices, std::move(triangles));
  return TriangleMesh(std::move(vertices), std::move(triangles), std::move(regions));
}

TriangleMesh refine_bisection(const TriangleMesh& mesh, std::span<const int> marked) {
  const int nt = mesh.num_triangles();
  for (int t : marked)
    if (t < 0 || t >= nt) throw InvalidArgument("refine_bisection: triangle index " + std::to_string(t) + " out of range");

  std::vector<char> edge_marked(static_cast<std::size_t>(mesh.num_edges()), 0);
  std::deque<int> queue;
  const auto mark = [&](int e) {
    if (edge_marked[static_cast<std::size_t>(e)]) return;
    edge_marked[static_cast<std::size_t>(e)] = 1;
    for (int t : mesh.edge(e).triangles)
      if (t >= 0) queue.push_back(t);
  };
  for (int t : marked) mark(mesh.refinement_edge(t));
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    const int ref = mesh.refinement_edge(t);
    if (edge_marked[static_cast<std::size_t>(ref)]) continue;
    for (int e : mesh.triangle_edges(t))
      if (edge_marked[static_cast<std::size_t>(e)]) {
        mark(ref);
        break;
      }
  }

  std::vector<Point> vertices = mesh.vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (!edge_marked[static_cast<std::size_t>(e)]) continue;
    const auto& ev = mesh.edge(e).vertices;
    midpoint.emplace(edge_key(ev[0], ev[1]), static_cast<int>(vertices.size()));
    vertices.push_back(0.5 * (mesh.vertex(ev[0]) + mesh.vertex(ev[1])));
  }

  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions, parents;
  triangles.reserve(static_cast<std::size_t>(nt) + 2 * midpoint.size());
  const auto split = [&](auto&& self, const std::array<int, 3>& tri, int parent, int region) -> void {
    const auto it = midpoint.find(edge_key(tri[1], tri[2]));
    if (it == midpoint.end()) {
      triangles.push_back(tri);
      parents.push_back(parent);
      regions.push_back(region);
      return;
    }
    const int m = it->second;
    self(self, {m, tri[0], tri[1]}, parent, region);
    self(self, {m, tri[2], tri[0]}, parent, region);
  };
  for (int t = 0; t < nt; ++t) split(split, mesh.triangle(t), t, mesh.region(t));

  std::vector<BoundarySegment> boundary;
  for (const auto& seg : mesh.boundary_segments()) {
    const auto it = midpoint.find(edge_key(seg.vertices[0], seg.vertices[1]));
    if (it == midpoint.end()) {
      boundary.push_back(seg);
    } else {
      boundary.push_back({{seg.vertices[0], it->second}, seg.marker});
      boundary.push_back({{it->second, seg.vertices[1]}, seg.marker});
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary),
                      std::move(parents));
}

TriangleMesh uniform_refine(const TriangleMesh& mesh) {
  const auto all = [](const TriangleMesh& m) {
    std::vector<int> ids(static_cast<std::size_t>(m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) ids[static_cast<std::size_t>(t)] = t;
    return ids;
  };
  const TriangleMesh once = refine_bisection(mesh, all(mesh));
  const TriangleMesh twice = refine_bisection(once, all(once));
  std::vector<int> parents(twice.parents());
  for (int& p : parents) p = once.parents()[static_cast<std::size_t>(p)];
  return TriangleMesh(twice.vertices(), twice.triangles(), twice.regions(), twice.boundary_segments(),
                      std::move(parents));
}

VertexPatch vertex_patch(const TriangleMesh& mesh, int k) {
  if (k < 0 || k >= mesh.num_vertices())
    throw InvalidArgument("vertex_patch: vertex index " + std::to_string(k) + " out of range");
  VertexPatch patch;
  patch.vertex = k;
  const auto tris = mesh.vertex_triangles(k);
  patch.triangles.assign(tris.begin(), tris.end());
  std::vector<int> verts;
  for (int t : patch.triangles) {
    for (int v : mesh.triangle(t)) verts.push_back(v);
    for (int e : mesh.triangle_edges(t)) {
      const MeshEdge& edge = mesh.edge(e);
      if (edge.is_boundary() || (edge.vertices[0] != k && edge.vertices[1] != k)) continue;
      patch.interior_edges.push_back(e);
    }
  }
  std::sort(patch.interior_edges.begin(), patch.interior_edges.end());
  patch.interior_edges.erase(std::unique(patch.interior_edges.begin(), patch.interior_edges.end()),
                             patch.interior_edges.end());
  for (std::size_t i = 0; i < verts.size(); ++i)
    for (std::size_t j = i + 1; j < verts.size(); ++j)
      patch.diameter = std::max(patch.diameter, (mesh.vertex(verts[i]) - mesh.vertex(verts[j])).norm());
  return patch;
}

MeshStats mesh_stats(const TriangleMesh& mesh) {
  MeshStats stats;
  stats.min_angle = 180.0;
  stats.h_min = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    for (int i = 0; i < 3; ++i) {
      const Point u = mesh.vertex(tri[(i + 1) % 3]) - mesh.vertex(tri[i]);
      const Point w = mesh.vertex(tri[(i + 2) % 3]) - mesh.vertex(tri[i]);
      const double angle = std::atan2(std::abs(cross(u, w)), u.dot(w)) * 180.0 / std::numbers::pi;
      stats.min_angle = std::min(stats.min_angle, angle);
      stats.max_angle = std::max(stats.max_angle, angle);
    }
    const double h = mesh.diameter(t);
    stats.h_max = std::max(stats.h_max, h);
    stats.h_min = std::min(stats.h_min, h);
  }
  std::vector<int> valence(static_cast<std::size_t>(mesh.num_vertices()), 0);
  for (const auto& e : mesh.edges()) {
    ++valence[static_cast<std::size_t>(e.vertices[0])];
    ++valence[static_cast<std::size_t>(e.vertices[1])];
  }
  for (int v : valence) stats.max_overlap = std::max(stats.max_overlap, v + 1);
  return stats;
}

} // namespace asfem
