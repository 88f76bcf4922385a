#include "asfem/error.hpp"
#include "asfem/mesh.hpp"

#include "meshes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

using namespace asfem;
using asfem::testing::cross_mesh;
using asfem::testing::unit_square_level;

TEST(BuiltinMesh, Counts) {
  const TriangleMesh sq1 = builtin_mesh(Domain::unit_square, 1);
  EXPECT_EQ(sq1.num_vertices(), 4);
  EXPECT_EQ(sq1.num_triangles(), 2);
  EXPECT_EQ(sq1.num_edges(), 5);

  const TriangleMesh l1 = builtin_mesh(Domain::l_shape, 1);
  EXPECT_EQ(l1.num_vertices(), 8);
  EXPECT_EQ(l1.num_triangles(), 6);

  const TriangleMesh sq2 = builtin_mesh(Domain::unit_square, 2);
  EXPECT_EQ(sq2.num_vertices(), 9);
  EXPECT_EQ(sq2.num_triangles(), 8);

  for (const auto* m : {&sq1, &l1, &sq2}) EXPECT_NO_THROW(m->validate());
}

TEST(BuiltinMesh, CheckerboardHasFourAlignedRegions) {
  const TriangleMesh mesh = builtin_mesh(Domain::checkerboard_square, 2);
  std::set<int> regions(mesh.regions().begin(), mesh.regions().end());
  EXPECT_EQ(regions, (std::set<int>{0, 1, 2, 3}));
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Point c = mesh.centroid(t);
    const int expected = (c.x() > 0.5 ? 1 : 0) + (c.y() > 0.5 ? 2 : 0);
    EXPECT_EQ(mesh.region(t), expected);
  }
}

TEST(BuiltinMesh, RefinementEdgeIsLongest) {
  const TriangleMesh mesh = builtin_mesh(Domain::l_shape, 2);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double ref = mesh.edge_length(mesh.refinement_edge(t));
    for (int e : mesh.triangle_edges(t)) EXPECT_GE(ref, mesh.edge_length(e) - 1e-15);
  }
}

TEST(BuiltinMesh, Errors) {
  EXPECT_THROW(parse_domain("annulus"), InvalidArgument);
  EXPECT_THROW(builtin_mesh(Domain::unit_square, 0), InvalidArgument);
  EXPECT_EQ(parse_domain("l_shape"), Domain::l_shape);
}

TEST(RefineBisection, ClosureBisectsNeighbour) {
  const TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  const std::vector<int> marked = {0};
  const TriangleMesh fine = refine_bisection(mesh, marked);
  EXPECT_EQ(fine.num_triangles(), 4);
  EXPECT_EQ(fine.num_vertices(), 5);
  EXPECT_NO_THROW(fine.validate());
}

TEST(RefineBisection, EmptyMarkingIsIdentity) {
  const TriangleMesh mesh = builtin_mesh(Domain::l_shape, 1);
  const TriangleMesh same = refine_bisection(mesh, {});
  EXPECT_EQ(same.vertices(), mesh.vertices());
  EXPECT_EQ(same.triangles(), mesh.triangles());
}

TEST(RefineBisection, OutOfRange) {
  const TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  const std::vector<int> bad = {2};
  EXPECT_THROW(refine_bisection(mesh, bad), InvalidArgument);
  const std::vector<int> negative = {-1};
  EXPECT_THROW(refine_bisection(mesh, negative), InvalidArgument);
}

TEST(RefineBisection, MinAngleBound) {
  TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  const double initial = mesh_stats(mesh).min_angle;
  const std::vector<int> both = {0, 1};
  mesh = refine_bisection(mesh, both);
  for (int i = 0; i < 3; ++i) {
    std::vector<int> all(static_cast<std::size_t>(mesh.num_triangles()));
    std::iota(all.begin(), all.end(), 0);
    mesh = refine_bisection(mesh, all);
    EXPECT_NO_THROW(mesh.validate());
    EXPECT_GE(mesh_stats(mesh).min_angle, initial / 2.0 - 1e-12);
  }
}

TEST(RefineBisection, LocalRefinementStaysConformingAndShapeRegular) {
  TriangleMesh mesh = builtin_mesh(Domain::l_shape, 1);
  const double initial = mesh_stats(mesh).min_angle;
  for (int i = 0; i < 12; ++i) {
    // refine towards the reentrant corner at the origin
    std::vector<int> marked;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      for (int v : mesh.triangle(t))
        if (mesh.vertex(v).norm() < 1e-14) marked.push_back(t);
    const TriangleMesh fine = refine_bisection(mesh, marked);
    EXPECT_NO_THROW(fine.validate());
    EXPECT_GE(mesh_stats(fine).min_angle, initial / 2.0 - 1e-12);
    // genealogy: children partition their parent
    std::vector<double> child_area(static_cast<std::size_t>(mesh.num_triangles()), 0.0);
    for (int t = 0; t < fine.num_triangles(); ++t) {
      const int parent = fine.parents()[static_cast<std::size_t>(t)];
      ASSERT_GE(parent, 0);
      child_area[static_cast<std::size_t>(parent)] += fine.signed_area(t);
    }
    for (int t = 0; t < mesh.num_triangles(); ++t)
      EXPECT_NEAR(child_area[static_cast<std::size_t>(t)], mesh.signed_area(t), 1e-15);
    for (int t : marked) {
      int children = 0;
      for (int c = 0; c < fine.num_triangles(); ++c) children += fine.parents()[static_cast<std::size_t>(c)] == t;
      EXPECT_GE(children, 2);
    }
    mesh = fine;
  }
}

TEST(UniformRefine, HalvesMeshSize) {
  TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  double h = mesh_stats(mesh).h_max;
  for (int level = 1; level <= 4; ++level) {
    mesh = uniform_refine(mesh);
    EXPECT_EQ(mesh.num_triangles(), 2 * (1 << (2 * level)));
    const double hl = mesh_stats(mesh).h_max;
    EXPECT_NEAR(hl, h / 2.0, 1e-14);
    h = hl;
    EXPECT_NO_THROW(mesh.validate());
  }
}

TEST(VertexPatch, CrossMesh) {
  const TriangleMesh mesh = cross_mesh();
  const VertexPatch center = vertex_patch(mesh, 4);
  EXPECT_EQ(center.triangles.size(), 4u);
  EXPECT_EQ(center.interior_edges.size(), 4u);
  EXPECT_NEAR(center.diameter, std::sqrt(2.0), 1e-15);
  const VertexPatch corner = vertex_patch(mesh, 0);
  EXPECT_EQ(corner.triangles.size(), 2u);
  EXPECT_EQ(corner.interior_edges.size(), 1u);
  EXPECT_THROW(vertex_patch(mesh, 5), InvalidArgument);
}

TEST(VertexPatch, TwoTriangleCorners) {
  const TriangleMesh mesh = builtin_mesh(Domain::unit_square, 1);
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    const VertexPatch patch = vertex_patch(mesh, k);
    EXPECT_TRUE(patch.triangles.size() == 1 || patch.triangles.size() == 2);
    EXPECT_EQ(patch.interior_edges.size(), patch.triangles.size() - 1);
    for (int t : patch.triangles) {
      const auto& tri = mesh.triangle(t);
      EXPECT_NE(std::find(tri.begin(), tri.end(), k), tri.end());
    }
  }
}

TEST(VertexPatch, CoverEachTriangleThreeTimes) {
  const TriangleMesh mesh = refine_bisection(builtin_mesh(Domain::l_shape, 2), std::vector<int>{0, 3, 7});
  std::vector<int> count(static_cast<std::size_t>(mesh.num_triangles()), 0);
  std::size_t total = 0;
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    const VertexPatch patch = vertex_patch(mesh, k);
    total += patch.triangles.size();
    for (int t : patch.triangles) ++count[static_cast<std::size_t>(t)];
  }
  EXPECT_EQ(total, 3u * static_cast<std::size_t>(mesh.num_triangles()));
  for (int c : count) EXPECT_EQ(c, 3);
}

TEST(MeshStats, Overlap) {
  EXPECT_EQ(mesh_stats(builtin_mesh(Domain::unit_square, 1)).max_overlap, 4);
  EXPECT_EQ(mesh_stats(cross_mesh()).max_overlap, 5);
  const int m2 = mesh_stats(unit_square_level(2)).max_overlap;
  for (int level = 3; level <= 5; ++level) EXPECT_EQ(mesh_stats(unit_square_level(level)).max_overlap, m2);
}

TEST(MeshStats, Angles) {
  const MeshStats s = mesh_stats(builtin_mesh(Domain::unit_square, 1));
  EXPECT_NEAR(s.min_angle, 45.0, 1e-12);
  EXPECT_NEAR(s.max_angle, 90.0, 1e-12);
  EXPECT_NEAR(s.h_max, std::sqrt(2.0), 1e-15);
}

TEST(MeshValidate, Orientation) {
  std::vector<Point> v = {{0, 0}, {1, 0}, {0, 1}};
  const TriangleMesh mesh(v, {{0, 2, 1}}, {0});
  try {
    mesh.validate();
    FAIL() << "expected InvariantViolation";
  } catch (const InvariantViolation& e) {
    EXPECT_NE(std::string(e.what()).find("orientation"), std::string::npos);
  }
}

TEST(MeshValidate, HangingNode) {
  std::vector<Point> v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const TriangleMesh mesh(v, {{0, 1, 2}, {0, 4, 3}, {4, 2, 3}}, {0, 0, 0});
  try {
    mesh.validate();
    FAIL() << "expected InvariantViolation";
  } catch (const InvariantViolation& e) {
    EXPECT_NE(std::string(e.what()).find("conformity"), std::string::npos);
  }
}

TEST(MeshValidate, EdgeSharedByThreeTriangles) {
  std::vector<Point> v = {{0, 0}, {1, 0}, {0.5, 1}, {0.5, -1}, {0.5, 2}};
  try {
    const TriangleMesh mesh(v, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}}, {0, 0, 0});
    FAIL() << "expected InvariantViolation";
  } catch (const InvariantViolation& e) {
    EXPECT_NE(std::string(e.what()).find("conformity"), std::string::npos);
  }
}

TEST(MeshIo, RoundTripBitExact) {
  std::vector<Point> v = {{0, 0}, {1.0 / 3.0, 0}, {0.1, 0.7}, {0.30000000000000004, 1e-300}};
  const TriangleMesh mesh(v, {{0, 1, 2}, {1, 3, 2}}, {0, 5});
  std::stringstream s;
  write_mesh(s, mesh);
  const TriangleMesh back = read_mesh(s);
  ASSERT_EQ(back.num_vertices(), mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i)
    EXPECT_EQ(std::memcmp(back.vertex(i).data(), mesh.vertex(i).data(), 2 * sizeof(double)), 0);
  EXPECT_EQ(back.triangles(), mesh.triangles());
  EXPECT_EQ(back.regions(), mesh.regions());
  std::stringstream again;
  write_mesh(again, back);
  EXPECT_EQ(again.str(), [&] {
    std::stringstream t;
    write_mesh(t, mesh);
    return t.str();
  }());
}

TEST(MeshIo, ParsesDecimalInput) {
  std::stringstream s("4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2 0\n0 2 3 1\n0 1 1\n1 2 1\n2 3 2\n3 0 1\n");
  const TriangleMesh mesh = read_mesh(s);
  EXPECT_EQ(mesh.num_triangles(), 2);
  EXPECT_EQ(mesh.region(1), 1);
  EXPECT_NO_THROW(mesh.validate());
  std::stringstream bad("4 2\n");
  EXPECT_THROW(read_mesh(bad), InvalidArgument);
}
