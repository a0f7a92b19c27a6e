#include <gtest/gtest.h>

#include <cmath>

#include "hfgl/mesh.hpp"

using namespace hfgl;

TEST(Mesh, StructuredCounts) {
  const Mesh m = build_structured(Box{{0, 0}, {80, 80}}, 10, 10);
  EXPECT_EQ(m.num_cells(), 100u);
  EXPECT_EQ(m.num_nodes(), 121u);
  EXPECT_DOUBLE_EQ(m.h, 8.0);
  const Mesh unit = build_structured(Box{}, 1, 1);
  EXPECT_EQ(unit.num_cells(), 1u);
  EXPECT_EQ(unit.num_nodes(), 4u);
  const Mesh big = build_structured(Box{{0, 0}, {80, 80}}, 170, 170);
  EXPECT_EQ(big.num_cells(), 28900u);
}

TEST(Mesh, CellsCounterClockwiseAndAreaSums) {
  const Mesh m = build_structured(Box{{0, 0}, {3, 2}}, 3, 2);
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    const auto& n = m.cells[c];
    const Vec2 a = m.nodes[n[1]] - m.nodes[n[0]];
    const Vec2 b = m.nodes[n[3]] - m.nodes[n[0]];
    EXPECT_GT(a.x() * b.y() - a.y() * b.x(), 0.0);
  }
  EXPECT_NEAR(m.total_area(), 6.0, 1e-14);
}

TEST(Mesh, BoundaryEdgesAndLocate) {
  const Mesh m = build_structured(Box{{0, 0}, {4, 4}}, 4, 4);
  EXPECT_EQ(m.boundary.size(), 16u);
  EXPECT_EQ(m.boundary_nodes().size(), 16u);
  const auto c = m.locate(Vec2(2.5, 1.5));
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(*c, m.cell_at(2, 1));
  EXPECT_FALSE(m.locate(Vec2(5.0, 1.0)).has_value());
}

TEST(Refine, CellCounts) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  const std::vector<int> one{g.cell_at(4, 4)};
  EXPECT_EQ(refine_footprint(g, one, 1).mesh.num_cells(), 4u);
  EXPECT_EQ(refine_footprint(g, one, 2).mesh.num_cells(), 16u);
  std::vector<int> twenty;
  for (int j = 3; j < 7; ++j)
    for (int i = 2; i < 7; ++i) twenty.push_back(g.cell_at(i, j));
  const LocalDomain ld = refine_footprint(g, twenty, 4);
  EXPECT_EQ(ld.mesh.num_cells(), 5120u);
  EXPECT_DOUBLE_EQ(ld.mesh.h, g.h / 16.0);
}

TEST(Refine, InterfaceLoopAndParents) {
  const Mesh g = build_structured(Box{{0, 0}, {6, 6}}, 6, 6);
  const std::vector<int> fp{g.cell_at(2, 2), g.cell_at(3, 2), g.cell_at(2, 3)};
  const LocalDomain ld = refine_footprint(g, fp, 2);
  EXPECT_EQ(ld.interface.num_coarse(), 8u);
  EXPECT_EQ(ld.interface.num_fine(), 32u);
  EXPECT_NEAR(ld.interface.length(g), 8.0, 1e-14);
  for (std::size_t k = 0; k < ld.interface.num_coarse(); ++k) {
    const int gn = ld.interface.global_nodes[k];
    const int ln = ld.interface.local_nodes[static_cast<std::size_t>(ld.interface.global_to_local_trace[k])];
    EXPECT_LT((g.nodes[static_cast<std::size_t>(gn)] - ld.mesh.nodes[static_cast<std::size_t>(ln)]).norm(), 1e-12);
  }
  for (std::size_t c = 0; c < ld.mesh.num_cells(); ++c) EXPECT_TRUE(ld.map.covers(ld.map.parent[c]));
}

TEST(Refine, RejectsBadFootprints) {
  const Mesh g = build_structured(Box{{0, 0}, {6, 6}}, 6, 6);
  EXPECT_THROW(refine_footprint(g, std::vector<int>{}, 1), InvalidGeometry);
  const std::vector<int> split{g.cell_at(1, 1), g.cell_at(4, 4)};
  EXPECT_THROW(refine_footprint(g, split, 1), InvalidGeometry);
  const std::vector<int> edge{g.cell_at(0, 2)};
  EXPECT_THROW(refine_footprint(g, edge, 1), InvalidGeometry);
  std::vector<int> ring;
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= 3; ++i)
      if (i != 2 || j != 2) ring.push_back(g.cell_at(i, j));
  EXPECT_THROW(refine_footprint(g, ring, 1), InvalidGeometry);
}

TEST(Refine, NormalizeClosesHolesAndPinches) {
  const Mesh g = build_structured(Box{{0, 0}, {8, 8}}, 8, 8);
  std::vector<int> ring;
  for (int j = 2; j <= 4; ++j)
    for (int i = 2; i <= 4; ++i)
      if (i != 3 || j != 3) ring.push_back(g.cell_at(i, j));
  const auto closed = normalize_footprint(g, ring);
  EXPECT_EQ(closed.size(), 9u);
  const std::vector<int> pinch{g.cell_at(2, 2), g.cell_at(3, 3)};
  const auto fixed = normalize_footprint(g, pinch);
  EXPECT_NO_THROW(refine_footprint(g, fixed, 1));
  EXPECT_TRUE(is_edge_connected(g, fixed));
}

TEST(Basis, ValuesAtCenterAndCorner) {
  const BasisEval c = eval_basis(Vec2(0, 0));
  for (double v : c.values) EXPECT_DOUBLE_EQ(v, 0.25);
  const BasisEval n0 = eval_basis(Vec2(-1, -1));
  EXPECT_DOUBLE_EQ(n0.values[0], 1.0);
  for (int a = 1; a < 4; ++a) EXPECT_DOUBLE_EQ(n0.values[static_cast<std::size_t>(a)], 0.0);
}

TEST(Basis, GradientMatchesFiniteDifferences) {
  const Vec2 xi(0.3, -0.7);
  const BasisEval b = eval_basis(xi);
  const double h = 1e-6;
  for (int k = 0; k < 2; ++k) {
    Vec2 p = xi, m = xi;
    p[k] += h;
    m[k] -= h;
    const BasisEval bp = eval_basis(p), bm = eval_basis(m);
    for (std::size_t a = 0; a < 4; ++a) {
      const double fd = (bp.values[a] - bm.values[a]) / (2 * h);
      EXPECT_NEAR(fd, b.gradients[a][k], 1e-8 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Basis, PartitionOfUnity) {
  for (double x : {-0.9, -0.2, 0.5})
    for (double y : {-0.4, 0.1, 0.8}) {
      const BasisEval b = eval_basis(Vec2(x, y));
      double s = 0;
      Vec2 g = Vec2::Zero();
      for (std::size_t a = 0; a < 4; ++a) {
        s += b.values[a];
        g += b.gradients[a];
      }
      EXPECT_NEAR(s, 1.0, 1e-15);
      EXPECT_NEAR(g.norm(), 0.0, 1e-15);
    }
}

TEST(Quadrature, Rules) {
  const auto q2 = quadrature(2);
  ASSERT_EQ(q2.size(), 4u);
  for (const auto& q : q2) EXPECT_DOUBLE_EQ(q.weight, 1.0);
  const auto q1 = quadrature(1);
  ASSERT_EQ(q1.size(), 1u);
  EXPECT_DOUBLE_EQ(q1[0].weight, 4.0);
  EXPECT_DOUBLE_EQ(q1[0].point.norm(), 0.0);
  double s = 0;
  for (const auto& q : q2) s += q.weight * q.point.x() * q.point.x() * q.point.y() * q.point.y();
  EXPECT_NEAR(s, 4.0 / 9.0, 1e-15);
}
