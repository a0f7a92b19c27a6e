#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "hfgl/constitutive.hpp"
#include "hfgl/mesh.hpp"

namespace hfgl {

using SpMat = Eigen::SparseMatrix<double>;  // column-major, compressed
using Vec = Eigen::VectorXd;

/// Nodal unknowns on one mesh. u is interleaved (ux0, uy0, ux1, ...).
struct FieldState {
  Vec u;
  Vec p;
  Vec d;

  void resize(std::size_t num_nodes) {
    u = Vec::Zero(static_cast<Eigen::Index>(2 * num_nodes));
    p = Vec::Zero(static_cast<Eigen::Index>(num_nodes));
    d = Vec::Zero(static_cast<Eigen::Index>(num_nodes));
  }
  std::size_t num_nodes() const { return static_cast<std::size_t>(p.size()); }
};

/// Crack driving history, one value per quadrature point (4 per cell).
struct HistoryState {
  std::vector<double> H;
  void resize(std::size_t num_cells) { H.assign(4 * num_cells, 0.0); }
};

inline constexpr int kQuadOrder = 2;
inline constexpr int kQpPerCell = 4;

/// Indices of the monolithic u-p system: three interleaved unknowns per node.
struct DofMap {
  static int ux(int node) { return 3 * node; }
  static int uy(int node) { return 3 * node + 1; }
  static int p(int node) { return 3 * node + 2; }
  static int u(int node, int comp) { return 3 * node + comp; }
};

enum class DofKind : std::uint8_t { bulk, interface, multiplier };

struct AssembledSystem {
  SpMat A;
  Vec r;
  std::vector<DofKind> labels;
};

/// Sparse pattern of a mesh with `per_node` coupled unknowns per node, plus the
/// value-array offset of every element matrix entry.
class SparsePattern {
 public:
  SparsePattern() = default;
  SparsePattern(const Mesh& mesh, int per_node);

  int per_node() const { return per_node_; }
  int size() const { return static_cast<int>(zero_.rows()); }
  int cell_block() const { return 4 * per_node_; }
  /// Offsets of cell c's element matrix, row-major over (4*per_node)^2 entries.
  const int* cell_offsets(int c) const { return offsets_.data() + static_cast<std::size_t>(c) * block2(); }
  SpMat zero_matrix() const { return zero_; }

 private:
  int block2() const { return cell_block() * cell_block(); }
  int per_node_ = 0;
  SpMat zero_;
  std::vector<int> offsets_;
};

struct LineSource {
  Vec2 a;
  Vec2 b;
  double rate = 0.0;  // total volume rate per unit thickness, m^2/s
};

struct SideTraction {
  Side side = Side::none;
  Vec2 t{0.0, 0.0};  // nominal traction, GPa
};

struct PoroLoads {
  std::vector<LineSource> lines;
  double r_F = 0.0;                       // volumetric source, 1/s
  std::vector<char> source_cells;         // cells carrying r_F; empty = none
  std::vector<SideTraction> tractions;
};

enum class PoroBlocks { mechanics, pressure, both };

struct PoroInputs {
  const Mesh* mesh = nullptr;
  const MaterialParams* mp = nullptr;
  const FieldState* state = nullptr;  // current u, p, d
  const FieldState* prev = nullptr;   // u_n, p_n
  const PoroLoads* loads = nullptr;
  double dt = 1.0;
  double h_e = 1.0;
  bool use_phasefield = true;            // false: d treated as 0 (intact material)
  const std::vector<char>* mech_cells = nullptr;  // cells in the mechanics integral; null = all
  const std::vector<char>* pres_cells = nullptr;  // cells in the pressure integral; null = all
};

/// Residual and tangent of the u-p weak forms on a 3-per-node pattern.
/// With tangent == false only the residual is formed.
void assemble_poro(const PoroInputs& in, PoroBlocks blocks, const SparsePattern& pattern,
                   AssembledSystem& out, bool tangent = true);

inline void assemble_mechanics(const PoroInputs& in, const SparsePattern& pattern, AssembledSystem& out) {
  assemble_poro(in, PoroBlocks::mechanics, pattern, out);
}
inline void assemble_pressure(const PoroInputs& in, const SparsePattern& pattern, AssembledSystem& out) {
  if (!(in.dt > 0.0)) throw std::invalid_argument("assemble_pressure: dt must be positive");
  assemble_poro(in, PoroBlocks::pressure, pattern, out);
}

/// Integral of the line sources against the nodal basis, per node.
Vec line_source_vector(const Mesh& mesh, const std::vector<LineSource>& lines);

/// D = <psi_elas - psi_c>+ at every quadrature point of every cell.
std::vector<double> driving_state(const Mesh& mesh, const Vec& u, const MaterialParams& mp);

/// Linear phase-field system A d = b for frozen history, on a 1-per-node pattern.
/// The reaction term is row-sum lumped so the system is an M-matrix.
void assemble_phasefield(const Mesh& mesh, const HistoryState& history, const MaterialParams& mp,
                         const SparsePattern& pattern, SpMat& A, Vec& b);

/// Residual of the phase-field equation at d.
Vec phasefield_residual(const Mesh& mesh, const Vec& d, const HistoryState& history, const MaterialParams& mp);

/// Zero the rows of `dofs` in A, put 1 on their diagonal and set r there to 0.
void apply_dirichlet_rows(SpMat& A, Vec& r, const std::vector<char>& is_fixed);

/// Fluid content integral of (p/M + B(J-1)) over the mesh.
double fluid_content(const Mesh& mesh, const FieldState& s, const MaterialParams& mp);

/// Deformation gradient, pressure and phase field at one quadrature point.
struct QpKinematics {
  Mat2 F;
  double p;
  double d;
  Vec2 grad_p;
  Vec2 grad_d;
};

QpKinematics qp_kinematics(const CellBasis& cb, const std::array<int, 4>& nodes, const FieldState& s);

}  // namespace hfgl
