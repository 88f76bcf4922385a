#pragma once

#include "asfem/mesh.hpp"

#include <memory>

namespace asfem::bench {

inline std::shared_ptr<const TriangleMesh> square(int level) {
  TriangleMesh m = builtin_mesh(Domain::unit_square, 1);
  for (int i = 0; i < level; ++i) m = uniform_refine(m);
  return std::make_shared<const TriangleMesh>(std::move(m));
}

} // namespace asfem::bench
