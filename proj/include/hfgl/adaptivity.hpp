#pragma once

#include <functional>
#include <vector>

#include "hfgl/config.hpp"
#include "hfgl/solver_gl.hpp"

namespace hfgl {

/// Cells within Chebyshev distance `layers` of any cell in `cells`, sorted.
std::vector<int> grow_cells(const Mesh& global, const std::vector<int>& cells, int layers);

/// Drops cells in the outer lattice ring (warning if any), then normalizes.
/// `clipped` reports whether anything had to be dropped.
std::vector<int> clip_and_normalize(const Mesh& global, const std::vector<int>& cells, bool* clipped = nullptr);

/// Largest phase-field value at the quadrature points of every local cell.
std::vector<double> cell_qp_max(const Mesh& local, const Vec& d);

/// Uncovered global cells within buffer_layers of a covered cell holding a
/// quadrature point with d > d_threshold.
std::vector<int> predict_marks(const Mesh& global, const LocalDomain& local, const Vec& d_L, const AdaptConfig& cfg);

/// New state on footprint + marks. Retained local values are copied, new
/// local nodes get u and p interpolated from the global fields and d = 0,
/// new history is 0. Multipliers restart from the complement reaction.
GLState extend_local_domain(const GLState& st, const std::vector<int>& marks, const RunConfig& cfg, double dt);

/// Value of a global field at a point (bilinear interpolation).
Vec2 interpolate_u(const Mesh& m, const Vec& u, const Vec2& x);
double interpolate_scalar(const Mesh& m, const Vec& f, const Vec2& x);

struct CorrectorResult {
  GLState state;
  GLStepStats stats;
  int passes = 0;       // trials run
  int cells_added = 0;  // over all corrector passes
};

using GLStepFn = std::function<GLStepStats(GLState&, std::vector<GlDiagRow>*)>;

/// Trial step, mark, extend and redo from state_n until no marks remain or
/// max_correctors extensions were made.
CorrectorResult corrector_loop(const GLStepFn& step_fn, const GLState& state_n, double dt, const RunConfig& cfg,
                               std::vector<GlDiagRow>* diag = nullptr);

}  // namespace hfgl
