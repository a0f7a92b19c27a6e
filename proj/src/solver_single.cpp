#include "hfgl/solver_single.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>

#include "hfgl/log.hpp"

namespace hfgl {

int& log_level() {
  static int level = 0;
  return level;
}

SingleScaleState initial_state(const PoroProblem& problem) {
  SingleScaleState st;
  st.s.resize(problem.mesh().num_nodes());
  for (Eigen::Index i = 0; i < st.s.d.size(); ++i) {
    if (problem.fixed_d[static_cast<std::size_t>(i)]) st.s.d[i] = problem.d_value[i];
  }
  st.s_n = st.s;
  st.history.resize(problem.mesh().num_cells());
  return st;
}

double relative_change(const FieldState& a, const FieldState& b) {
  auto rel = [](const Vec& x, const Vec& y) {
    const double diff = (x - y).norm();
    if (diff == 0.0) return 0.0;
    return diff / std::max({x.norm(), y.norm(), 1e-300});
  };
  return std::max({rel(a.u, b.u), rel(a.p, b.p), rel(a.d, b.d)});
}

namespace {

StepStats attempt(PoroProblem& problem, SingleScaleState& state, double dt, const TimeConfig& cfg,
                  const NewtonOptions& newton) {
  StepStats stats;
  const FieldState prev = state.s;
  const HistoryState& H_n = state.history;
  FieldState cur = state.s;
  HistoryState H_trial = H_n;
  for (int it = 1; it <= cfg.stagger_max; ++it) {
    const FieldState before = cur;
    const auto D = driving_state(problem.mesh(), cur.u, problem.params());
    for (std::size_t q = 0; q < D.size(); ++q) H_trial.H[q] = update_history(H_n.H[q], D[q]);
    if (problem.use_phasefield) cur.d = problem.solve_phasefield(H_trial);
    stats.newton_iters += problem.solve_up(cur, prev, dt, newton).iterations;
    stats.stagger_iters = it;
    stats.change = relative_change(cur, before);
    if (stats.change < cfg.stagger_tol) break;
    if (it == cfg.stagger_max)
      log_at(1, "staggered loop hit stagger_max=%d (change %.3e); accepting step", cfg.stagger_max, stats.change);
  }
  state.s_n = prev;
  state.s = cur;
  state.history = std::move(H_trial);
  state.t += dt;
  return stats;
}

StepStats step_recursive(PoroProblem& problem, SingleScaleState& state, double dt, const TimeConfig& cfg,
                         const NewtonOptions& newton, int depth) {
  const SingleScaleState backup = state;
  try {
    return attempt(problem, state, dt, cfg, newton);
  } catch (const std::runtime_error& e) {
    state = backup;
    if (depth >= cfg.max_halvings) throw;
    log_at(1, "step rejected at dt=%.4g (%s); halving", dt, e.what());
    StepStats a = step_recursive(problem, state, 0.5 * dt, cfg, newton, depth + 1);
    StepStats b = step_recursive(problem, state, 0.5 * dt, cfg, newton, depth + 1);
    // s_n must refer to the state at the start of the full step
    state.s_n = backup.s;
    StepStats out;
    out.stagger_iters = a.stagger_iters + b.stagger_iters;
    out.newton_iters = a.newton_iters + b.newton_iters;
    out.halvings = 1 + std::max(a.halvings, b.halvings);
    out.change = b.change;
    return out;
  }
}

}  // namespace

StepStats step_single(PoroProblem& problem, SingleScaleState& state, double dt, const TimeConfig& cfg,
                      const NewtonOptions& newton) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_single: dt must be positive");
  return step_recursive(problem, state, dt, cfg, newton, 0);
}

int num_steps(const TimeConfig& t) { return static_cast<int>(std::llround(t.t_end / t.dt)); }

std::unique_ptr<SingleScaleRun> setup_single(const RunConfig& cfg) {
  auto run = std::make_unique<SingleScaleRun>();
  const int level = cfg.single_level >= 0 ? cfg.single_level : cfg.level;
  run->mesh = build_structured(cfg.extent, cfg.nx << level, cfg.ny << level);
  run->mp = cfg.material;
  run->problem = std::make_unique<PoroProblem>(run->mesh, run->mp, run->mesh.h);
  run->problem->fix_sides(cfg.u_fixed, cfg.p_fixed);
  run->problem->set_notches(cfg.notches, true);
  run->problem->loads.r_F = cfg.r_F;
  run->problem->loads.tractions = cfg.tractions;
  run->state = initial_state(*run->problem);
  return run;
}

TimeSeries run_single(const RunConfig& cfg, const StepObserver& observer) {
  auto run = setup_single(cfg);
  TimeSeries ts;
  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir);
  const int steps = num_steps(cfg.time);
  const long dofs = 4L * static_cast<long>(run->mesh.num_nodes());
  for (int n = 1; n <= steps; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    const StepStats st = step_single(*run->problem, run->state, cfg.time.dt, cfg.time, cfg.newton);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    run->state.t = n * cfg.time.dt;
    SeriesRow row;
    row.t = run->state.t;
    row.p_crack_max = crack_pressure_max(run->state.s);
    row.total_dofs = dofs;
    row.gl_iters = 0;
    row.wall_ms = ms;
    ts.rows.push_back(row);
    log_at(1, "single step %d t=%.3f p_crack=%.6e stagger=%d newton=%d (%.0f ms)", n, row.t, row.p_crack_max,
           st.stagger_iters, st.newton_iters, ms);
    if (observer) observer(n, *run);
    if (write) {
      write_series_csv(ts, cfg.output_dir + "/series.csv");
      if (cfg.snapshot_stride > 0 && n % cfg.snapshot_stride == 0)
        write_vtk(run->mesh, run->state.s, cfg.output_dir + "/single_" + std::to_string(n) + ".vtk");
    }
  }
  return ts;
}

}  // namespace hfgl
