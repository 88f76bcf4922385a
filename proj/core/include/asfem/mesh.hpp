#pragma once

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asfem {

using Point = Eigen::Vector2d;

struct MeshEdge {
  std::array<int, 2> vertices;  // ascending
  std::array<int, 2> triangles; // triangles[1] < 0 on the boundary
  bool is_boundary() const { return triangles[1] < 0; }
};

struct BoundarySegment {
  std::array<int, 2> vertices;
  int marker = 1;
};

/// Conforming triangulation of a polygonal domain.
///
/// Triangle (a, b, c) is stored counter-clockwise with its refinement edge (b, c)
/// opposite the newest vertex a. Edges are derived on construction; boundary
/// edges carry an integer marker. `parents()[t]` is the index, in the mesh this
/// one was refined from, of the triangle containing t (-1 for an initial mesh).
class TriangleMesh {
public:
  TriangleMesh() = default;
  TriangleMesh(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
               std::vector<int> regions, std::vector<BoundarySegment> boundary = {},
               std::vector<int> parents = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }
  const std::vector<int>& regions() const { return regions_; }
  int region(int t) const { return regions_[static_cast<std::size_t>(t)]; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  const MeshEdge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
  const std::vector<int>& parents() const { return parents_; }

  /// Edge ids of triangle t; entry i is the edge opposite local vertex i, so entry 0
  /// is the refinement edge.
  const std::array<int, 3>& triangle_edges(int t) const { return triangle_edges_[static_cast<std::size_t>(t)]; }
  int refinement_edge(int t) const { return triangle_edges(t)[0]; }

  std::span<const int> vertex_triangles(int v) const;
  bool is_boundary_vertex(int v) const { return boundary_vertex_[static_cast<std::size_t>(v)] != 0; }
  /// Marker of a boundary edge, -1 for interior edges.
  int edge_marker(int e) const { return edge_markers_[static_cast<std::size_t>(e)]; }
  std::vector<BoundarySegment> boundary_segments() const;

  double signed_area(int t) const;
  double diameter(int t) const;
  double edge_length(int e) const;
  Point centroid(int t) const;

  /// Throws InvariantViolation naming the broken invariant (orientation, conformity).
  void validate() const;

private:
  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<int> regions_;
  std::vector<int> parents_;
  std::vector<MeshEdge> edges_;
  std::vector<std::array<int, 3>> triangle_edges_;
  std::vector<int> edge_markers_;
  std::vector<char> boundary_vertex_;
  std::vector<int> vertex_triangle_offsets_;
  std::vector<int> vertex_triangle_list_;
  std::vector<BoundarySegment> declared_boundary_;
};

enum class Domain { unit_square, l_shape, checkerboard_square };

Domain parse_domain(std::string_view name);
std::string_view to_string(Domain domain);

/// Structured triangulation of a builtin domain with n0 cells per unit length.
/// unit_square = (0,1)^2; l_shape = (-1,1)^2 minus [0,1)x(-1,0];
/// checkerboard_square = (0,1)^2 with 2*n0 cells per side and region ids 0..3
/// laid out 2x2 (id = [x > 1/2] + 2 [y > 1/2]). Refinement edges start at the
/// longest edge of every triangle.
TriangleMesh builtin_mesh(Domain domain, int n0);

/// Rotate every triangle so that its refinement edge is its longest edge; ties go
/// to the edge whose opposite vertex has the smallest index.
std::vector<std::array<int, 3>> longest_edge_labeling(const std::vector<Point>& vertices,
                                                      std::vector<std::array<int, 3>> triangles);

/// Newest-vertex bisection of every marked triangle with conforming closure.
TriangleMesh refine_bisection(const TriangleMesh& mesh, std::span<const int> marked);

/// Halves the mesh size: two bisection sweeps over all triangles. Parents refer
/// to the input mesh.
TriangleMesh uniform_refine(const TriangleMesh& mesh);

struct VertexPatch {
  int vertex = -1;
  std::vector<int> triangles;      // triangles having `vertex` as a corner
  std::vector<int> interior_edges; // edges in the interior of the patch
  double diameter = 0.0;
};

VertexPatch vertex_patch(const TriangleMesh& mesh, int k);

struct MeshStats {
  double min_angle = 0.0; // degrees
  double max_angle = 0.0; // degrees
  int max_overlap = 0;    // M = max_k #{j : patches k and j share a triangle}
  double h_max = 0.0;
  double h_min = 0.0;
};

MeshStats mesh_stats(const TriangleMesh& mesh);

/// ASCII format: "nv nt nb", then nv lines "x y", nt lines "v0 v1 v2 region",
/// nb lines "v0 v1 marker"; 0-based indices.
void write_mesh(std::ostream& out, const TriangleMesh& mesh);
TriangleMesh read_mesh(std::istream& in);
void write_mesh_file(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_mesh_file(const std::string& path);

} // namespace asfem
