#pragma once

#include <vector>

#include "hfgl/assembly.hpp"
#include "hfgl/linalg.hpp"
#include "hfgl/mesh.hpp"

namespace hfgl {

struct Notch {
  Vec2 a;
  Vec2 b;
  double f_bar = 0.0;  // injected volume rate per unit thickness, m^2/s
};

/// Nodes within (strictly) one cell size of any notch segment.
std::vector<int> notch_nodes(const Mesh& mesh, const std::vector<Notch>& notches);

/// Cells whose closure meets a notch segment.
std::vector<char> notch_cells(const Mesh& mesh, const std::vector<Notch>& notches);

/// Pack/unpack u, p into the interleaved monolithic vector.
Vec pack_up(const FieldState& s);
void unpack_up(const Vec& x, FieldState& s);

/// Sparse patterns, solvers and boundary data of the u-p and phase-field
/// problems on one mesh. Holds no field values.
class PoroProblem {
 public:
  PoroProblem(const Mesh& mesh, const MaterialParams& mp, double h_e);

  const Mesh& mesh() const { return *mesh_; }
  const MaterialParams& params() const { return *mp_; }
  double h_e() const { return h_e_; }

  /// Dirichlet flags on the 3-per-node u-p unknowns; prescribed values are
  /// whatever the state holds at those unknowns when a solve starts.
  std::vector<char> fixed_up;
  /// Dirichlet flags and values for the phase field.
  std::vector<char> fixed_d;
  Vec d_value;

  PoroLoads loads;
  bool use_phasefield = true;
  std::vector<char> mech_cells;  // empty = all cells
  std::vector<char> pres_cells;  // empty = all cells

  void fix_sides(std::span<const Side> u_sides, std::span<const Side> p_sides);
  void fix_node_up(int node, bool u, bool p);
  void set_notches(const std::vector<Notch>& notches, bool apply_dirichlet);

  /// Linear phase-field solve for frozen history.
  Vec solve_phasefield(const HistoryState& history);

  /// Monolithic u-p Newton with d frozen at s.d.
  NewtonResult solve_up(FieldState& s, const FieldState& prev, double dt, const NewtonOptions& opt);

  /// Residual (and tangent) of the u-p system with Dirichlet rows applied.
  void eval_up(const FieldState& s, const FieldState& prev, double dt, AssembledSystem& sys, bool tangent,
               bool dirichlet = true) const;

  const SparsePattern& up_pattern() const { return up_pattern_; }
  const SparsePattern& d_pattern() const { return d_pattern_; }

 private:
  PoroInputs inputs(const FieldState& s, const FieldState& prev, double dt) const;

  const Mesh* mesh_;
  const MaterialParams* mp_;
  double h_e_;
  SparsePattern up_pattern_;
  SparsePattern d_pattern_;
  DirectSolver up_solver_;
  DirectSolver d_solver_;
};

}  // namespace hfgl
