#pragma once

#include "asfem/mesh.hpp"

#include <memory>

namespace asfem::testing {

/// Unit square split into 4 triangles around the center vertex 4; every
/// triangle has the center as newest vertex.
inline TriangleMesh cross_mesh() {
  std::vector<Point> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  std::vector<std::array<int, 3>> t = {{4, 0, 1}, {4, 1, 2}, {4, 2, 3}, {4, 3, 0}};
  return TriangleMesh(v, t, {0, 0, 0, 0});
}

inline std::shared_ptr<const TriangleMesh> shared(TriangleMesh mesh) {
  return std::make_shared<const TriangleMesh>(std::move(mesh));
}

/// L uniform refinements of the 2-triangle unit square.
inline TriangleMesh unit_square_level(int level) {
  TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  for (int i = 0; i < level; ++i) mesh = uniform_refine(mesh);
  return mesh;
}

} // namespace asfem::testing
