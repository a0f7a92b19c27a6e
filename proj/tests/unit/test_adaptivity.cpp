#include <gtest/gtest.h>

#include <algorithm>

#include "hfgl/adaptivity.hpp"

using namespace hfgl;

namespace {

struct Fixture {
  RunConfig cfg;
  Mesh global;
  std::shared_ptr<GLDomain> dom;
  Fixture(std::vector<int> fp, int n = 10) {
    cfg.nx = cfg.ny = n;
    cfg.level = 1;
    cfg.extent = Box{{0, 0}, {double(n), double(n)}};
    cfg.material.l = 2.0 * cfg.h_local();
    cfg.material.derive();
    global = build_structured(cfg.extent, n, n);
    dom = build_gl_domain(global, cfg.material, cfg, fp);
  }
};

std::vector<int> block_cells(const Mesh& g, int i0, int i1, int j0, int j1) {
  std::vector<int> out;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) out.push_back(g.cell_at(i, j));
  std::sort(out.begin(), out.end());
  return out;
}

// Local phase field equal to 1 on every node of the local cells inside global cell gc.
Vec hot_cell(const GLDomain& dom, int gc) {
  Vec d = Vec::Zero(static_cast<Eigen::Index>(dom.local.mesh.num_nodes()));
  for (std::size_t c = 0; c < dom.local.mesh.num_cells(); ++c)
    if (dom.local.map.parent[c] == gc)
      for (int n : dom.local.mesh.cells[c]) d[n] = 1.0;
  return d;
}

}  // namespace

TEST(Grow, ChebyshevLayers) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  EXPECT_EQ(grow_cells(g, {g.cell_at(5, 5)}, 1).size(), 9u);
  EXPECT_EQ(grow_cells(g, {g.cell_at(5, 5)}, 2).size(), 25u);
  EXPECT_EQ(grow_cells(g, {g.cell_at(0, 0)}, 1).size(), 4u);
}

TEST(Clip, DropsOuterRingWithFlag) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  bool clipped = false;
  const auto out = clip_and_normalize(g, block_cells(g, 0, 2, 3, 4), &clipped);
  EXPECT_TRUE(clipped);
  EXPECT_EQ(out, block_cells(g, 1, 2, 3, 4));
  const auto same = clip_and_normalize(g, block_cells(g, 3, 4, 3, 4), &clipped);
  EXPECT_FALSE(clipped);
  EXPECT_EQ(same, block_cells(g, 3, 4, 3, 4));
}

TEST(Marks, ZeroFieldGivesNoMarks) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  Fixture s(block_cells(g, 4, 5, 4, 5));
  const Vec d = Vec::Zero(static_cast<Eigen::Index>(s.dom->local.mesh.num_nodes()));
  EXPECT_TRUE(predict_marks(s.global, s.dom->local, d, s.cfg.adapt).empty());
}

TEST(Marks, CrackAtInterfaceMarksNeighbours) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  Fixture s(block_cells(g, 4, 5, 4, 5));
  AdaptConfig ac = s.cfg.adapt;
  ac.buffer_layers = 1;
  const int hot = s.global.cell_at(5, 5);
  const auto marks = predict_marks(s.global, s.dom->local, hot_cell(*s.dom, hot), ac);
  // Nodal d = 1 on the hot cell leaks above 0.5 into the fine cells sharing
  // its edges, so the whole 2x2 footprint is hot: the 4x4 ring around it.
  EXPECT_EQ(marks.size(), 12u);
  for (int c : marks) {
    EXPECT_FALSE(s.dom->local.map.covers(c));
    const auto [i, j] = s.global.cell_ij[static_cast<std::size_t>(c)];
    EXPECT_TRUE(i >= 3 && i <= 6 && j >= 3 && j <= 6);
  }
}

TEST(Marks, CrackFarFromInterfaceGivesNoMarks) {
  const Mesh g = build_structured(Box{{0, 0}, {12, 12}}, 12, 12);
  Fixture s(block_cells(g, 2, 8, 2, 8), 12);
  const int hot = s.global.cell_at(5, 5);
  EXPECT_TRUE(predict_marks(s.global, s.dom->local, hot_cell(*s.dom, hot), s.cfg.adapt).empty());
}

TEST(Extend, EmptyMarksIsIdentity) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  Fixture s(block_cells(g, 4, 5, 4, 5));
  const GLState st = initial_gl_state(s.dom);
  const GLState out = extend_local_domain(st, {}, s.cfg, 0.1);
  EXPECT_EQ(out.dom, st.dom);
}

TEST(Extend, CopiesRetainedValuesAndReproducesLinearFields) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  Fixture s(block_cells(g, 4, 5, 4, 5));
  GLState st = initial_gl_state(s.dom);
  auto lin_u = [](const Vec2& x) { return Vec2(1e-3 * x.x() - 2e-4 * x.y(), 5e-4 * x.y() + 1e-4); };
  auto lin_p = [](const Vec2& x) { return 1e-4 * (x.x() + 2 * x.y()); };
  for (std::size_t n = 0; n < s.global.num_nodes(); ++n) {
    const Vec2 u = lin_u(s.global.nodes[n]);
    st.G.u[static_cast<Eigen::Index>(2 * n)] = u.x();
    st.G.u[static_cast<Eigen::Index>(2 * n + 1)] = u.y();
    st.G.p[static_cast<Eigen::Index>(n)] = lin_p(s.global.nodes[n]);
  }
  st.G_n = st.G;
  for (Eigen::Index i = 0; i < st.L.u.size(); ++i) st.L.u[i] = 0.01 * static_cast<double>(i);
  for (Eigen::Index i = 0; i < st.L.d.size(); ++i) st.L.d[i] = 0.5;
  for (std::size_t q = 0; q < st.H_L.H.size(); ++q) st.H_L.H[q] = static_cast<double>(q);

  const int added = s.global.cell_at(6, 4);
  const GLState out = extend_local_domain(st, {added}, s.cfg, 0.1);
  ASSERT_NE(out.dom, st.dom);
  const Mesh& oldm = st.dom->local.mesh;
  const Mesh& newm = out.dom->local.mesh;
  EXPECT_EQ(out.dom->footprint.size(), 5u);
  for (std::size_t n = 0; n < newm.num_nodes(); ++n) {
    const auto [i, j] = newm.node_ij[n];
    const int o = oldm.node_at(i, j);
    const auto k = static_cast<Eigen::Index>(n);
    if (o >= 0) {
      EXPECT_EQ(out.L.u[2 * k], st.L.u[2 * o]);
      EXPECT_EQ(out.L.u[2 * k + 1], st.L.u[2 * o + 1]);
      EXPECT_EQ(out.L.d[k], st.L.d[o]);
    } else {
      const Vec2 u = lin_u(newm.nodes[n]);
      EXPECT_NEAR(out.L.u[2 * k], u.x(), 1e-15);
      EXPECT_NEAR(out.L.u[2 * k + 1], u.y(), 1e-15);
      EXPECT_NEAR(out.L.p[k], lin_p(newm.nodes[n]), 1e-15);
      EXPECT_EQ(out.L.d[k], 0.0);
    }
  }
  for (std::size_t c = 0; c < newm.num_cells(); ++c) {
    const auto [i, j] = newm.cell_ij[c];
    const int o = oldm.cell_at(i, j);
    for (int q = 0; q < kQpPerCell; ++q) {
      const double h = out.H_L.H[c * kQpPerCell + static_cast<std::size_t>(q)];
      if (o >= 0)
        EXPECT_EQ(h, st.H_L.H[static_cast<std::size_t>(o) * kQpPerCell + static_cast<std::size_t>(q)]);
      else
        EXPECT_EQ(h, 0.0);
    }
  }
  EXPECT_LT((out.lambda_L + out.lambda_C).norm(), 1e-15);
}

TEST(Corrector, NoGrowthAcceptsFirstTrial) {
  const Mesh g = build_structured(Box{{0, 0}, {10, 10}}, 10, 10);
  Fixture s(block_cells(g, 4, 5, 4, 5));
  const GLState st = initial_gl_state(s.dom);
  int calls = 0;
  const CorrectorResult r = corrector_loop(
      [&](GLState&, std::vector<GlDiagRow>*) {
        ++calls;
        return GLStepStats{};
      },
      st, 0.1, s.cfg);
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.passes, 1);
  EXPECT_EQ(r.cells_added, 0);
}

TEST(Corrector, GrowthRedoesFromSameStateAndFootprintGrows) {
  const Mesh g = build_structured(Box{{0, 0}, {12, 12}}, 12, 12);
  Fixture s(block_cells(g, 5, 6, 5, 6), 12);
  GLState st = initial_gl_state(s.dom);
  for (std::size_t q = 0; q < st.H_L.H.size(); ++q) st.H_L.H[q] = 1e-9 * static_cast<double>(q);
  s.cfg.adapt.buffer_layers = 1;
  int history_mismatches = 0;
  std::vector<std::size_t> sizes;
  const Mesh& lm0 = s.dom->local.mesh;
  // The trial crack spans the local domain along y = 6 so every footprint
  // edge cell on that line stays hot until the footprint reaches the clip.
  const auto step = [&](GLState& trial, std::vector<GlDiagRow>* rows) {
    // Retained history must come from state_n, not from a rejected trial.
    const Mesh& lmt = trial.dom->local.mesh;
    for (std::size_t c = 0; c < lmt.num_cells(); ++c) {
      const int o = lm0.cell_at(lmt.cell_ij[c][0], lmt.cell_ij[c][1]);
      if (o < 0) continue;
      for (int q = 0; q < kQpPerCell; ++q)
        if (trial.H_L.H[c * kQpPerCell + static_cast<std::size_t>(q)] !=
            st.H_L.H[static_cast<std::size_t>(o) * kQpPerCell + static_cast<std::size_t>(q)])
          ++history_mismatches;
    }
    sizes.push_back(trial.dom->footprint.size());
    const Mesh& lm = trial.dom->local.mesh;
    for (std::size_t n = 0; n < lm.num_nodes(); ++n)
      trial.L.d[static_cast<Eigen::Index>(n)] = std::abs(lm.nodes[n].y() - 6.0) < 0.6 ? 1.0 : 0.0;
    for (auto& h : trial.H_L.H) h += 1.0;
    if (rows) rows->push_back(GlDiagRow{});
    return GLStepStats{};
  };
  std::vector<GlDiagRow> diag;
  const CorrectorResult r = corrector_loop(step, st, 0.1, s.cfg, &diag);
  EXPECT_GE(r.passes, 2);
  EXPECT_GT(r.cells_added, 0);
  for (std::size_t k = 1; k < sizes.size(); ++k) EXPECT_GT(sizes[k], sizes[k - 1]);
  EXPECT_EQ(history_mismatches, 0);
  EXPECT_EQ(diag.size(), static_cast<std::size_t>(r.passes));
  EXPECT_EQ(diag.back().corrector_pass, r.passes);
}
