#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "hfgl/assembly.hpp"
#include "hfgl/config.hpp"
#include "hfgl/mesh.hpp"
#include "hfgl/mortar.hpp"
#include "hfgl/output.hpp"
#include "hfgl/poro_problem.hpp"

namespace hfgl {

/// Interface vectors hold three entries per coarse trace node (ux, uy, p),
/// in interface loop order.
inline constexpr int kTraceComps = 3;

/// Geometry, mortar operators and problem definitions for one footprint.
/// Shared (read-only apart from solver caches) between a state and its copies.
struct GLDomain {
  const Mesh* global = nullptr;
  const MaterialParams* mp = nullptr;
  std::vector<int> footprint;  // sorted global cells
  LocalDomain local;
  Mortar mortar;

  std::vector<char> complement_cells;  // global cells outside the footprint
  std::vector<int> fict_interior;      // global nodes strictly inside the footprint
  std::vector<int> fict_interior_local;  // coincident local node of each
  std::vector<int> trace_global_dofs;  // 3nc u-p dofs of the global system
  std::vector<int> trace_local_dofs;   // 3nf u-p dofs of the local system (fine trace)

  Eigen::MatrixXd M3;       // Mcc (x) I3
  Eigen::MatrixXd P3;       // Mcc^-1 Mcf (x) I3, fine trace -> coarse nodal values
  SpMat Tf;                 // (Mcf (x) I3) scattered onto the local u-p dofs
  Eigen::LDLT<Eigen::MatrixXd> M3_ldlt;

  std::unique_ptr<PoroProblem> global_problem;  // complement mechanics, full pressure
  std::unique_ptr<PoroProblem> complement_problem;  // complement only, for S_C and lambda_C
  std::unique_ptr<PoroProblem> local_problem;

  DirectSolver local_solver;
  DirectSolver aux_solver;

  int nc3() const { return static_cast<int>(M3.rows()); }
  long total_dofs() const;
};

/// Builds the footprint's local mesh, interface, mortar and problems.
std::shared_ptr<GLDomain> build_gl_domain(const Mesh& global, const MaterialParams& mp, const RunConfig& cfg,
                                          std::span<const int> footprint);

struct GLState {
  std::shared_ptr<GLDomain> dom;
  FieldState G, G_n;  // global u, p; d is identically 0
  FieldState L, L_n;  // local u, p, d
  HistoryState H_L;   // committed local history

  Vec w;         // interface trace from the local solve (half step)
  Vec phi;       // interface trace after the global solve
  Vec lambda_L;  // local multiplier, coarse nodal values
  Vec lambda_C;  // complement multiplier
  Vec Lambda_L;  // Robin data for the local problem
  Vec Lambda_G;  // Robin data for the global problem
  Eigen::MatrixXd K_L;
  Eigen::MatrixXd K_G;
  bool stiffness_ready = false;
  double stiffness_dt = 0.0;
  double t = 0.0;
};

/// Zero fields; notch nodes carry d = 1; multipliers zero.
GLState initial_gl_state(std::shared_ptr<GLDomain> dom);

/// Complement-domain tangent of one global u-p system condensed onto the
/// trace dofs. Rows listed in `fixed` are replaced by identity rows first.
Eigen::MatrixXd complement_schur(const SpMat& A_complement_tangent, const std::vector<char>& fixed,
                                 const std::vector<int>& trace_dofs);

/// Fine-trace Schur complement S_L projected to the coarse basis:
/// (Mcf(x)I3) (Mff(x)I3)^-1 S_L (I(x)I3).
Eigen::MatrixXd project_local_schur(const SpMat& A_local_tangent, const std::vector<int>& fine_trace_dofs,
                                    const Mortar& m);

/// Drop the u-p cross blocks of a 3-component interface matrix.
void decouple_fields(Eigen::MatrixXd& K);

void compute_augmented_stiffness(GLState& st, double dt, const GLConfig& cfg);

/// Lambda_G = K_G x_L - M3 lambda_L (x_L: coarse nodal trace of the local fields).
Vec recover_global_data(const Eigen::MatrixXd& K_G, const Vec& x_L_trace, const Vec& lambda_L,
                        const Eigen::MatrixXd& M3);
/// Lambda_L = K_L x_G - M3 lambda_C.
Vec recover_local_data(const Eigen::MatrixXd& K_L, const Vec& x_G_trace, const Vec& lambda_C,
                       const Eigen::MatrixXd& M3);

/// Trace helpers.
Vec global_trace(const GLDomain& dom, const FieldState& G);
Vec local_trace_coarse(const GLDomain& dom, const FieldState& L);

/// Local Robin problem with d frozen: updates L (u, p), lambda_L and w.
NewtonResult solve_local(GLState& st, double dt, const NewtonOptions& opt);

/// Global problem on the complement with the trace prescribed from w and
/// fictitious-interior displacements taken from the local fields. Updates G,
/// lambda_C and phi. Returns Newton statistics.
NewtonResult solve_global(GLState& st, double dt, const NewtonOptions& opt);

/// lambda_C = M3^-1 (complement residual at the trace).
Vec complement_multiplier(const GLDomain& dom, const FieldState& G, const FieldState& G_n, double dt);

struct Imbalance {
  double phi = 0.0;    // displacement trace
  double p = 0.0;      // pressure trace
  double force = 0.0;  // mortar moments of lambda_C + lambda_L
};

/// Mortar-weighted norms of a - b relative to max(|b|, floor), per field;
/// the force entry is |M3 (lambda_C + lambda_L)| relative to the larger multiplier.
Imbalance trace_imbalance(const GLDomain& dom, const Vec& a, const Vec& b, const Vec& lambda_C,
                          const Vec& lambda_L, double floor_u = 0.0, double floor_p = 0.0);

struct GLStepStats {
  int iterations = 0;
  Imbalance last;
  int halvings = 0;
};

enum class GLCoupling { robin, dirichlet_neumann };

struct GLStepOptions {
  TimeConfig time;
  NewtonOptions newton;
  GLConfig gl;
  GLCoupling coupling = GLCoupling::robin;
  bool freeze_d = false;  // keep d at its current values (linear tests)
  double dn_relaxation = 0.5;
  int dn_max_iter = 200;
};

/// Newton settings used inside the GL iteration: tighter absolute tolerance
/// and at least one iteration per solve.
NewtonOptions gl_newton_options(const NewtonOptions& base);

/// One time step of the global-local iteration. Throws NonConvergence with the
/// imbalance history when gl_max_iter is exceeded. `diag` (optional) receives
/// one row per iteration.
GLStepStats gl_step(GLState& st, double dt, const GLStepOptions& opt, std::vector<GlDiagRow>* diag = nullptr);

/// gl_step with recursive step halving on failure.
GLStepStats gl_step_adaptive_dt(GLState& st, double dt, const GLStepOptions& opt,
                                std::vector<GlDiagRow>* diag = nullptr);

/// Monolithic mortar-tied solve of complement + local for one step (d frozen),
/// used as an independent oracle for the GL fixed point. Returns the converged
/// global and local fields.
struct MortarTiedSolution {
  FieldState G;
  FieldState L;
};
MortarTiedSolution solve_mortar_tied(const GLState& st, double dt, const NewtonOptions& opt);

struct GLRun {
  Mesh global;
  MaterialParams mp;
  GLState state;
  std::vector<std::vector<int>> footprint_history;  // accepted footprint per step
};

using GLObserver = std::function<void(int step, const GLRun&)>;

/// Initial footprint: explicit cells or the notch cells plus buffer layers,
/// normalized and clipped away from the outer boundary.
std::vector<int> initial_footprint(const Mesh& global, const RunConfig& cfg);

std::unique_ptr<GLRun> setup_gl(const RunConfig& cfg);

/// Full run with predictor-corrector adaptivity; writes series.csv,
/// gl_diag.csv and snapshots into cfg.output_dir unless it is empty.
TimeSeries run_gl(const RunConfig& cfg, const GLObserver& observer = {});

}  // namespace hfgl
