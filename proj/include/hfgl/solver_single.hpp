#pragma once

#include <functional>
#include <memory>

#include "hfgl/assembly.hpp"
#include "hfgl/config.hpp"
#include "hfgl/output.hpp"
#include "hfgl/poro_problem.hpp"

namespace hfgl {

struct SingleScaleState {
  FieldState s;    // current u, p, d
  FieldState s_n;  // previous accepted step
  HistoryState history;
  double t = 0.0;
};

struct StepStats {
  int stagger_iters = 0;
  int newton_iters = 0;
  int halvings = 0;
  double change = 0.0;
};

SingleScaleState initial_state(const PoroProblem& problem);

/// Relative change max_f |a_f - b_f| / max(|a_f|, floor) over u, p, d.
double relative_change(const FieldState& a, const FieldState& b);

/// One accepted time step of the staggered scheme. On Newton failure the
/// step is redone as two half steps, recursively up to cfg.max_halvings.
StepStats step_single(PoroProblem& problem, SingleScaleState& state, double dt, const TimeConfig& cfg,
                      const NewtonOptions& newton);

/// Mesh, problem and state for a single-scale run of `cfg`.
struct SingleScaleRun {
  Mesh mesh;
  MaterialParams mp;
  std::unique_ptr<PoroProblem> problem;
  SingleScaleState state;
};

/// Single-scale mesh of the config: the global lattice refined by single_level.
std::unique_ptr<SingleScaleRun> setup_single(const RunConfig& cfg);

/// Callback after every accepted step (step index from 1).
using StepObserver = std::function<void(int step, const SingleScaleRun&)>;

/// Full run; writes series.csv and snapshots into cfg.output_dir unless it is empty.
TimeSeries run_single(const RunConfig& cfg, const StepObserver& observer = {});

int num_steps(const TimeConfig& t);

}  // namespace hfgl
