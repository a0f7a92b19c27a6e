#include <gtest/gtest.h>

#include <filesystem>

#include "hfgl/solver_single.hpp"

using namespace hfgl;

namespace {

RunConfig small_example(double t_end) {
  RunConfig cfg;
  cfg.nx = cfg.ny = 10;
  cfg.level = 1;
  cfg.notches = {{{36, 40}, {44, 40}, 0.002}};
  cfg.material.l = 2.0 * cfg.h_local();
  cfg.material.derive();
  cfg.time.dt = 0.1;
  cfg.time.t_end = t_end;
  cfg.output_dir.clear();
  return cfg;
}

}  // namespace

TEST(Single, ZeroLoadsIsFixedPoint) {
  const Mesh mesh = build_structured(Box{{0, 0}, {4, 4}}, 4, 4);
  MaterialParams mp;
  mp.derive();
  PoroProblem prob(mesh, mp, mesh.h);
  const std::vector<Side> all{Side::left, Side::right, Side::bottom, Side::top};
  prob.fix_sides(all, all);
  SingleScaleState st = initial_state(prob);
  const StepStats s = step_single(prob, st, 0.1, TimeConfig{}, NewtonOptions{});
  EXPECT_EQ(s.stagger_iters, 1);
  EXPECT_DOUBLE_EQ(st.s.u.norm() + st.s.p.norm() + st.s.d.norm(), 0.0);
  EXPECT_NEAR(st.t, 0.1, 1e-15);
}

TEST(Single, SealedBoxLinearPressureGrowth) {
  const Mesh mesh = build_structured(Box{{0, 0}, {4, 4}}, 4, 4);
  MaterialParams mp;
  mp.derive();
  PoroProblem prob(mesh, mp, mesh.h);
  const std::vector<Side> all{Side::left, Side::right, Side::bottom, Side::top};
  prob.fix_sides(all, {});
  prob.loads.r_F = 1e-3;
  prob.loads.source_cells.assign(mesh.num_cells(), 1);
  SingleScaleState st = initial_state(prob);
  for (int k = 1; k <= 4; ++k) {
    step_single(prob, st, 0.1, TimeConfig{}, NewtonOptions{});
    const double expect = k * mp.M * 0.1 * 1e-3;
    EXPECT_LT((st.s.p.array() - expect).abs().maxCoeff(), 1e-8 * expect);
  }
}

TEST(Single, RelativeChange) {
  FieldState a, b;
  a.resize(3);
  b.resize(3);
  EXPECT_EQ(relative_change(a, b), 0.0);
  b.p[0] = 1.0;
  EXPECT_DOUBLE_EQ(relative_change(a, b), 1.0);
}

TEST(Single, NumSteps) {
  TimeConfig t;
  t.dt = 0.1;
  t.t_end = 15.0;
  EXPECT_EQ(num_steps(t), 150);
  t.t_end = 0.1;
  EXPECT_EQ(num_steps(t), 1);
}

TEST(Single, OneStepRunWritesOneRow) {
  RunConfig cfg = small_example(0.1);
  cfg.output_dir = (std::filesystem::temp_directory_path() / "hfgl_single_one").string();
  std::filesystem::remove_all(cfg.output_dir);
  const TimeSeries ts = run_single(cfg);
  ASSERT_EQ(ts.rows.size(), 1u);
  EXPECT_EQ(read_series_csv(cfg.output_dir + "/series.csv").rows.size(), 1u);
  EXPECT_GT(ts.rows[0].p_crack_max, 0.0);
}

TEST(Single, InjectionRaisesCrackPressureAndKeepsBounds) {
  const RunConfig cfg = small_example(0.5);
  double last = 0.0;
  int steps = 0;
  std::vector<double> H_prev;
  run_single(cfg, [&](int, const SingleScaleRun& run) {
    const double p = crack_pressure_max(run.state.s);
    EXPECT_GT(p, last);
    last = p;
    EXPECT_GE(run.state.s.d.minCoeff(), -1e-10);
    EXPECT_LE(run.state.s.d.maxCoeff(), 1 + 1e-10);
    if (!H_prev.empty())
      for (std::size_t q = 0; q < H_prev.size(); ++q) EXPECT_GE(run.state.history.H[q], H_prev[q]);
    H_prev = run.state.history.H;
    ++steps;
  });
  EXPECT_EQ(steps, 5);
}

TEST(Single, DeterministicOutput) {
  const RunConfig cfg = small_example(0.2);
  const TimeSeries a = run_single(cfg), b = run_single(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].p_crack_max, b.rows[i].p_crack_max);
}
