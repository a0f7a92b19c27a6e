#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hfgl {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

class InvalidGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Box {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double area() const { return width() * height(); }
};

enum class BoundaryTag { dirichlet, neumann, crack_notch };

enum class Side { left, right, bottom, top, none };

struct BoundaryEdge {
  std::array<int, 2> nodes;  // ordered counter-clockwise along the cell boundary
  int cell;
  BoundaryTag tag;
  Side side;  // which outer side of the box, or none for interior (interface) edges
};

/// Axis-aligned bilinear quadrilateral mesh living on a regular lattice.
///
/// Every cell is a square of size `h`. Global meshes cover the whole lattice;
/// local meshes cover a subset of lattice cells. Lattice lookups give O(1)
/// point location and node matching between nested meshes.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 4>> cells;  // counter-clockwise
  std::vector<BoundaryEdge> boundary;
  double h = 0.0;

  Vec2 origin{0.0, 0.0};
  int lattice_nx = 0;
  int lattice_ny = 0;
  std::vector<int> lattice_cell;  // lattice cell (i + j*nx) -> cell id or -1
  std::vector<int> lattice_node;  // lattice node (i + j*(nx+1)) -> node id or -1
  std::vector<std::array<int, 2>> cell_ij;  // cell id -> lattice (i, j)
  std::vector<std::array<int, 2>> node_ij;  // node id -> lattice (i, j)

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_cells() const { return cells.size(); }

  int cell_at(int i, int j) const;
  int node_at(int i, int j) const;

  /// Cell containing `x` (closed cells; ties go to the lower-left cell that exists).
  std::optional<int> locate(const Vec2& x) const;

  double cell_area(int c) const;
  double total_area() const;

  /// Nodes that lie on a boundary edge carrying one of the given sides.
  std::vector<int> nodes_on_sides(std::span<const Side> sides) const;
  std::vector<int> boundary_nodes() const;
};

/// Uniform nx-by-ny mesh of `extent`; all outer edges tagged dirichlet.
Mesh build_structured(const Box& extent, int nx, int ny);

/// Which global cells a local mesh covers and at what refinement level.
struct LocalDomainMap {
  std::vector<int> global_cells_covered;  // sorted
  int refinement_level = 1;
  std::vector<int> parent;  // local cell -> global cell

  int subdivisions() const { return 1 << refinement_level; }
  bool covers(int global_cell) const;
};

/// Trace meshes of the interface between the local footprint and the rest of
/// the global mesh. Both traces are ordered along the same closed loop.
struct Interface {
  std::vector<int> global_nodes;                // coarse trace, loop order
  std::vector<std::array<int, 2>> global_edges; // indices into global_nodes
  std::vector<int> local_nodes;                 // fine trace, loop order
  std::vector<std::array<int, 2>> local_edges;  // indices into local_nodes
  std::vector<int> local_edge_parent;           // fine edge -> coarse edge
  std::vector<int> global_to_local_trace;       // coarse trace index -> fine trace index

  std::size_t num_coarse() const { return global_nodes.size(); }
  std::size_t num_fine() const { return local_nodes.size(); }
  double length(const Mesh& global) const;
};

struct LocalDomain {
  Mesh mesh;
  LocalDomainMap map;
  Interface interface;
};

/// Refine a connected footprint of global cells by 2^level per direction.
/// Throws InvalidGeometry for an empty, disconnected or punctured footprint,
/// or one that touches the outer boundary.
LocalDomain refine_footprint(const Mesh& global, std::span<const int> footprint, int level);

/// Global cells edge-adjacent to `cell` (up to four).
std::vector<int> edge_neighbors(const Mesh& m, int cell);
bool is_edge_connected(const Mesh& m, std::span<const int> cells);

/// Closes holes and removes vertex pinches so the footprint boundary is one
/// simple closed loop. Returns the normalized, sorted footprint.
std::vector<int> normalize_footprint(const Mesh& global, std::span<const int> cells);

/// Local node that coincides with global node `g`, or -1.
int local_node_of_global(const LocalDomain& local, const Mesh& global, int g);

// ---------------------------------------------------------------------------
// Reference element

struct BasisEval {
  std::array<double, 4> values;
  std::array<Vec2, 4> gradients;  // w.r.t. reference coordinates
};

BasisEval eval_basis(const Vec2& xi);

struct QuadraturePoint {
  Vec2 point;
  double weight;
};

/// Tensor-product Gauss rule on [-1,1]^2, order in {1,2,3} points per direction.
std::vector<QuadraturePoint> quadrature(int order);

/// 1D Gauss rule on [-1,1].
std::vector<std::pair<double, double>> gauss_1d(int order);

/// Shape function values and physical gradients at a reference point of a cell.
struct CellBasis {
  std::array<double, 4> N;
  std::array<Vec2, 4> dN;  // physical gradients
  double detJ;
};

CellBasis cell_basis(const Mesh& m, int cell, const Vec2& xi);

/// Reference coordinates of physical point `x` inside axis-aligned cell `c`.
Vec2 reference_coords(const Mesh& m, int c, const Vec2& x);

/// Distance from a point to a segment.
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace hfgl
