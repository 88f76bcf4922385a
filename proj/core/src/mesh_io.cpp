#include "asfem/error.hpp"
#include "asfem/mesh.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace asfem {

void write_mesh(std::ostream& out, const TriangleMesh& mesh) {
  const auto boundary = mesh.boundary_segments();
  out << fmt::format("{} {} {}\n", mesh.num_vertices(), mesh.num_triangles(), boundary.size());
  for (const Point& p : mesh.vertices()) out << fmt::format("{} {}\n", p[0], p[1]);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    out << fmt::format("{} {} {} {}\n", tri[0], tri[1], tri[2], mesh.region(t));
  }
  for (const auto& seg : boundary) out << fmt::format("{} {} {}\n", seg.vertices[0], seg.vertices[1], seg.marker);
}

TriangleMesh read_mesh(std::istream& in) {
  long long nv = 0, nt = 0, nb = 0;
  if (!(in >> nv >> nt >> nb) || nv < 0 || nt < 0 || nb < 0)
    throw InvalidArgument("read_mesh: malformed header, expected 'nv nt nb'");
  std::vector<Point> vertices(static_cast<std::size_t>(nv));
  for (auto& p : vertices) {
    std::string xs, ys;
    if (!(in >> xs >> ys)) throw InvalidArgument("read_mesh: truncated vertex block");
    try {
      std::size_t used = 0;
      p[0] = std::stod(xs, &used);
      if (used != xs.size()) throw InvalidArgument("");
      p[1] = std::stod(ys, &used);
      if (used != ys.size()) throw InvalidArgument("");
    } catch (const std::exception&) {
      throw InvalidArgument("read_mesh: bad coordinate '" + xs + " " + ys + "'");
    }
  }
  std::vector<std::array<int, 3>> triangles(static_cast<std::size_t>(nt));
  std::vector<int> regions(static_cast<std::size_t>(nt));
  for (long long t = 0; t < nt; ++t) {
    auto& tri = triangles[static_cast<std::size_t>(t)];
    if (!(in >> tri[0] >> tri[1] >> tri[2] >> regions[static_cast<std::size_t>(t)]))
      throw InvalidArgument("read_mesh: truncated triangle block");
  }
  std::vector<BoundarySegment> boundary(static_cast<std::size_t>(nb));
  for (auto& seg : boundary)
    if (!(in >> seg.vertices[0] >> seg.vertices[1] >> seg.marker))
      throw InvalidArgument("read_mesh: truncated boundary block");
  for (const auto& seg : boundary)
    for (int v : seg.vertices)
      if (v < 0 || v >= nv) throw InvalidArgument("read_mesh: boundary vertex index out of range");
  return TriangleMesh(std::move(vertices), std::move(triangles), std::move(regions), std::move(boundary));
}

void write_mesh_file(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_mesh(out, mesh);
}

TriangleMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open mesh file '" + path + "'");
  return read_mesh(in);
}

} // namespace asfem
