#include "hfgl/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace hfgl {

int Mesh::cell_at(int i, int j) const {
  if (i < 0 || j < 0 || i >= lattice_nx || j >= lattice_ny) return -1;
  return lattice_cell[static_cast<std::size_t>(i + j * lattice_nx)];
}

int Mesh::node_at(int i, int j) const {
  if (i < 0 || j < 0 || i > lattice_nx || j > lattice_ny) return -1;
  return lattice_node[static_cast<std::size_t>(i + j * (lattice_nx + 1))];
}

std::optional<int> Mesh::locate(const Vec2& x) const {
  const double tol = 1e-9;
  const double fx = (x.x() - origin.x()) / h;
  const double fy = (x.y() - origin.y()) / h;
  const int i0 = static_cast<int>(std::floor(fx));
  const int j0 = static_cast<int>(std::floor(fy));
  for (int di = 0; di >= -1; --di) {
    for (int dj = 0; dj >= -1; --dj) {
      const int i = i0 + di;
      const int j = j0 + dj;
      const int c = cell_at(i, j);
      if (c < 0) continue;
      if (fx >= i - tol && fx <= i + 1 + tol && fy >= j - tol && fy <= j + 1 + tol) return c;
    }
  }
  return std::nullopt;
}

double Mesh::cell_area(int c) const {
  const auto& cn = cells[static_cast<std::size_t>(c)];
  double a = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Vec2& p = nodes[static_cast<std::size_t>(cn[static_cast<std::size_t>(k)])];
    const Vec2& q = nodes[static_cast<std::size_t>(cn[static_cast<std::size_t>((k + 1) % 4)])];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

double Mesh::total_area() const {
  double a = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) a += cell_area(static_cast<int>(c));
  return a;
}

std::vector<int> Mesh::nodes_on_sides(std::span<const Side> sides) const {
  std::set<int> out;
  for (const auto& e : boundary) {
    if (std::find(sides.begin(), sides.end(), e.side) == sides.end()) continue;
    out.insert(e.nodes[0]);
    out.insert(e.nodes[1]);
  }
  return {out.begin(), out.end()};
}

std::vector<int> Mesh::boundary_nodes() const {
  std::set<int> out;
  for (const auto& e : boundary) {
    out.insert(e.nodes[0]);
    out.insert(e.nodes[1]);
  }
  return {out.begin(), out.end()};
}

Mesh build_structured(const Box& extent, int nx, int ny) {
  if (nx < 1 || ny < 1) throw InvalidGeometry("build_structured: nx and ny must be >= 1");
  if (!(extent.width() > 0.0) || !(extent.height() > 0.0))
    throw InvalidGeometry("build_structured: extent must have positive width and height");
  const double hx = extent.width() / nx;
  const double hy = extent.height() / ny;
  if (std::abs(hx - hy) > 1e-10 * std::max(hx, hy))
    throw InvalidGeometry("build_structured: cells must be square");

  Mesh m;
  m.h = hx;
  m.origin = extent.lo;
  m.lattice_nx = nx;
  m.lattice_ny = ny;
  m.lattice_node.assign(static_cast<std::size_t>((nx + 1) * (ny + 1)), -1);
  m.lattice_cell.assign(static_cast<std::size_t>(nx * ny), -1);
  m.nodes.reserve(m.lattice_node.size());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      m.lattice_node[static_cast<std::size_t>(i + j * (nx + 1))] = static_cast<int>(m.nodes.size());
      m.nodes.emplace_back(extent.lo.x() + i * hx, extent.lo.y() + j * hy);
      m.node_ij.push_back({i, j});
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int c = static_cast<int>(m.cells.size());
      m.lattice_cell[static_cast<std::size_t>(i + j * nx)] = c;
      m.cells.push_back({m.node_at(i, j), m.node_at(i + 1, j), m.node_at(i + 1, j + 1), m.node_at(i, j + 1)});
      m.cell_ij.push_back({i, j});
    }
  }
  for (int i = 0; i < nx; ++i) {
    m.boundary.push_back({{m.node_at(i, 0), m.node_at(i + 1, 0)}, m.cell_at(i, 0), BoundaryTag::dirichlet, Side::bottom});
    m.boundary.push_back({{m.node_at(i + 1, ny), m.node_at(i, ny)}, m.cell_at(i, ny - 1), BoundaryTag::dirichlet, Side::top});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary.push_back({{m.node_at(nx, j), m.node_at(nx, j + 1)}, m.cell_at(nx - 1, j), BoundaryTag::dirichlet, Side::right});
    m.boundary.push_back({{m.node_at(0, j + 1), m.node_at(0, j)}, m.cell_at(0, j), BoundaryTag::dirichlet, Side::left});
  }
  return m;
}

bool LocalDomainMap::covers(int global_cell) const {
  return std::binary_search(global_cells_covered.begin(), global_cells_covered.end(), global_cell);
}

double Interface::length(const Mesh& global) const {
  double len = 0.0;
  for (const auto& e : global_edges) {
    len += (global.nodes[static_cast<std::size_t>(global_nodes[static_cast<std::size_t>(e[1])])] -
            global.nodes[static_cast<std::size_t>(global_nodes[static_cast<std::size_t>(e[0])])])
               .norm();
  }
  return len;
}

std::vector<int> edge_neighbors(const Mesh& m, int cell) {
  const auto [i, j] = m.cell_ij[static_cast<std::size_t>(cell)];
  std::vector<int> out;
  for (const auto& [di, dj] : {std::pair{-1, 0}, std::pair{1, 0}, std::pair{0, -1}, std::pair{0, 1}}) {
    const int n = m.cell_at(i + di, j + dj);
    if (n >= 0) out.push_back(n);
  }
  return out;
}

bool is_edge_connected(const Mesh& m, std::span<const int> cells) {
  if (cells.empty()) return false;
  const std::set<int> in(cells.begin(), cells.end());
  std::set<int> seen{*in.begin()};
  std::deque<int> queue{*in.begin()};
  while (!queue.empty()) {
    const int c = queue.front();
    queue.pop_front();
    for (int n : edge_neighbors(m, c)) {
      if (in.count(n) && !seen.count(n)) {
        seen.insert(n);
        queue.push_back(n);
      }
    }
  }
  return seen.size() == in.size();
}

std::vector<int> normalize_footprint(const Mesh& global, std::span<const int> cells) {
  std::vector<char> covered(global.num_cells(), 0);
  for (int c : cells) covered[static_cast<std::size_t>(c)] = 1;
  const int nx = global.lattice_nx;
  const int ny = global.lattice_ny;
  auto is_cov = [&](int i, int j) {
    const int c = global.cell_at(i, j);
    return c >= 0 && covered[static_cast<std::size_t>(c)];
  };

  bool changed = true;
  while (changed) {
    changed = false;
    // Holes: uncovered cells not reachable from the outer ring.
    std::vector<char> outside(global.num_cells(), 0);
    std::deque<int> queue;
    for (int i = 0; i < nx; ++i) {
      for (int j : {0, ny - 1}) {
        const int c = global.cell_at(i, j);
        if (!covered[static_cast<std::size_t>(c)] && !outside[static_cast<std::size_t>(c)]) {
          outside[static_cast<std::size_t>(c)] = 1;
          queue.push_back(c);
        }
      }
    }
    for (int j = 0; j < ny; ++j) {
      for (int i : {0, nx - 1}) {
        const int c = global.cell_at(i, j);
        if (!covered[static_cast<std::size_t>(c)] && !outside[static_cast<std::size_t>(c)]) {
          outside[static_cast<std::size_t>(c)] = 1;
          queue.push_back(c);
        }
      }
    }
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      for (int n : edge_neighbors(global, c)) {
        if (!covered[static_cast<std::size_t>(n)] && !outside[static_cast<std::size_t>(n)]) {
          outside[static_cast<std::size_t>(n)] = 1;
          queue.push_back(n);
        }
      }
    }
    for (std::size_t c = 0; c < global.num_cells(); ++c) {
      if (!covered[c] && !outside[c]) {
        covered[c] = 1;
        changed = true;
      }
    }
    // Vertex pinches: two diagonal cells covered, the other two not.
    for (int j = 1; j < ny; ++j) {
      for (int i = 1; i < nx; ++i) {
        const bool a = is_cov(i - 1, j - 1);
        const bool b = is_cov(i, j - 1);
        const bool c = is_cov(i, j);
        const bool d = is_cov(i - 1, j);
        if (a && c && !b && !d) {
          covered[static_cast<std::size_t>(global.cell_at(i, j - 1))] = 1;
          changed = true;
        } else if (b && d && !a && !c) {
          covered[static_cast<std::size_t>(global.cell_at(i - 1, j - 1))] = 1;
          changed = true;
        }
      }
    }
  }
  std::vector<int> out;
  for (std::size_t c = 0; c < global.num_cells(); ++c) {
    if (covered[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

namespace {

// Directed boundary edges of a cell set on a lattice, counter-clockwise.
struct LatticeEdge {
  std::array<int, 2> from;
  std::array<int, 2> to;
};

std::vector<LatticeEdge> footprint_boundary(const Mesh& global, const std::vector<char>& covered) {
  std::vector<LatticeEdge> edges;
  auto cov = [&](int i, int j) {
    const int c = global.cell_at(i, j);
    return c >= 0 && covered[static_cast<std::size_t>(c)];
  };
  for (std::size_t c = 0; c < global.num_cells(); ++c) {
    if (!covered[c]) continue;
    const auto [i, j] = global.cell_ij[c];
    if (!cov(i, j - 1)) edges.push_back({{i, j}, {i + 1, j}});
    if (!cov(i + 1, j)) edges.push_back({{i + 1, j}, {i + 1, j + 1}});
    if (!cov(i, j + 1)) edges.push_back({{i + 1, j + 1}, {i, j + 1}});
    if (!cov(i - 1, j)) edges.push_back({{i, j + 1}, {i, j}});
  }
  return edges;
}

}  // namespace

LocalDomain refine_footprint(const Mesh& global, std::span<const int> footprint, int level) {
  if (footprint.empty()) throw InvalidGeometry("refine_footprint: empty footprint");
  if (level < 1) throw InvalidGeometry("refine_footprint: refinement level must be >= 1");
  std::vector<char> covered(global.num_cells(), 0);
  for (int c : footprint) {
    if (c < 0 || static_cast<std::size_t>(c) >= global.num_cells())
      throw InvalidGeometry("refine_footprint: cell id out of range");
    covered[static_cast<std::size_t>(c)] = 1;
  }
  if (!is_edge_connected(global, footprint))
    throw InvalidGeometry("refine_footprint: footprint is not edge-connected");
  for (int c : footprint) {
    const auto [i, j] = global.cell_ij[static_cast<std::size_t>(c)];
    if (i == 0 || j == 0 || i == global.lattice_nx - 1 || j == global.lattice_ny - 1)
      throw InvalidGeometry("refine_footprint: footprint touches the outer boundary");
  }

  const int s = 1 << level;
  LocalDomain out;
  out.map.refinement_level = level;
  for (std::size_t c = 0; c < covered.size(); ++c) {
    if (covered[c]) out.map.global_cells_covered.push_back(static_cast<int>(c));
  }

  Mesh& m = out.mesh;
  m.h = global.h / s;
  m.origin = global.origin;
  m.lattice_nx = global.lattice_nx * s;
  m.lattice_ny = global.lattice_ny * s;
  m.lattice_cell.assign(static_cast<std::size_t>(m.lattice_nx * m.lattice_ny), -1);
  m.lattice_node.assign(static_cast<std::size_t>((m.lattice_nx + 1) * (m.lattice_ny + 1)), -1);
  auto node_id = [&](int i, int j) {
    int& id = m.lattice_node[static_cast<std::size_t>(i + j * (m.lattice_nx + 1))];
    if (id < 0) {
      id = static_cast<int>(m.nodes.size());
      m.nodes.emplace_back(m.origin.x() + i * m.h, m.origin.y() + j * m.h);
      m.node_ij.push_back({i, j});
    }
    return id;
  };
  for (int gc : out.map.global_cells_covered) {
    const auto [gi, gj] = global.cell_ij[static_cast<std::size_t>(gc)];
    for (int b = 0; b < s; ++b) {
      for (int a = 0; a < s; ++a) {
        const int i = gi * s + a;
        const int j = gj * s + b;
        const int c = static_cast<int>(m.cells.size());
        m.lattice_cell[static_cast<std::size_t>(i + j * m.lattice_nx)] = c;
        m.cells.push_back({node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)});
        m.cell_ij.push_back({i, j});
        out.map.parent.push_back(gc);
      }
    }
  }
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto [i, j] = m.cell_ij[c];
    const auto& n = m.cells[c];
    const int ci = static_cast<int>(c);
    if (m.cell_at(i, j - 1) < 0) m.boundary.push_back({{n[0], n[1]}, ci, BoundaryTag::neumann, Side::none});
    if (m.cell_at(i + 1, j) < 0) m.boundary.push_back({{n[1], n[2]}, ci, BoundaryTag::neumann, Side::none});
    if (m.cell_at(i, j + 1) < 0) m.boundary.push_back({{n[2], n[3]}, ci, BoundaryTag::neumann, Side::none});
    if (m.cell_at(i - 1, j) < 0) m.boundary.push_back({{n[3], n[0]}, ci, BoundaryTag::neumann, Side::none});
  }

  // Coarse trace as one closed loop.
  const auto edges = footprint_boundary(global, covered);
  std::map<std::array<int, 2>, std::size_t> outgoing;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!outgoing.emplace(edges[e].from, e).second)
      throw InvalidGeometry("refine_footprint: footprint boundary has a vertex pinch");
  }
  std::vector<std::size_t> loop;
  std::vector<char> used(edges.size(), 0);
  std::size_t e = 0;
  while (!used[e]) {
    used[e] = 1;
    loop.push_back(e);
    auto it = outgoing.find(edges[e].to);
    if (it == outgoing.end()) throw InvalidGeometry("refine_footprint: open interface polyline");
    e = it->second;
  }
  if (loop.size() != edges.size())
    throw InvalidGeometry("refine_footprint: footprint has a hole (interface is not a single loop)");

  Interface& itf = out.interface;
  for (std::size_t k = 0; k < loop.size(); ++k) {
    const auto& le = edges[loop[k]];
    itf.global_nodes.push_back(global.node_at(le.from[0], le.from[1]));
    const int nk = static_cast<int>(loop.size());
    itf.global_edges.push_back({static_cast<int>(k), static_cast<int>((static_cast<int>(k) + 1) % nk)});
    itf.global_to_local_trace.push_back(static_cast<int>(itf.local_nodes.size()));
    const int di = le.to[0] - le.from[0];
    const int dj = le.to[1] - le.from[1];
    for (int t = 0; t < s; ++t) {
      const int fi = le.from[0] * s + t * di;
      const int fj = le.from[1] * s + t * dj;
      itf.local_nodes.push_back(m.node_at(fi, fj));
      itf.local_edge_parent.push_back(static_cast<int>(k));
    }
  }
  const int nf = static_cast<int>(itf.local_nodes.size());
  for (int f = 0; f < nf; ++f) itf.local_edges.push_back({f, (f + 1) % nf});
  return out;
}

int local_node_of_global(const LocalDomain& local, const Mesh& global, int g) {
  const int s = local.map.subdivisions();
  const auto [i, j] = global.node_ij[static_cast<std::size_t>(g)];
  return local.mesh.node_at(i * s, j * s);
}

BasisEval eval_basis(const Vec2& xi) {
  static constexpr std::array<double, 4> sx{-1.0, 1.0, 1.0, -1.0};
  static constexpr std::array<double, 4> sy{-1.0, -1.0, 1.0, 1.0};
  BasisEval b;
  for (std::size_t a = 0; a < 4; ++a) {
    const double fx = 1.0 + sx[a] * xi.x();
    const double fy = 1.0 + sy[a] * xi.y();
    b.values[a] = 0.25 * fx * fy;
    b.gradients[a] = Vec2(0.25 * sx[a] * fy, 0.25 * sy[a] * fx);
  }
  return b;
}

std::vector<std::pair<double, double>> gauss_1d(int order) {
  switch (order) {
    case 1:
      return {{0.0, 2.0}};
    case 2: {
      const double g = 1.0 / std::sqrt(3.0);
      return {{-g, 1.0}, {g, 1.0}};
    }
    case 3: {
      const double g = std::sqrt(0.6);
      return {{-g, 5.0 / 9.0}, {0.0, 8.0 / 9.0}, {g, 5.0 / 9.0}};
    }
    default:
      throw std::invalid_argument("quadrature: unsupported order " + std::to_string(order));
  }
}

std::vector<QuadraturePoint> quadrature(int order) {
  const auto g = gauss_1d(order);
  std::vector<QuadraturePoint> q;
  for (const auto& [y, wy] : g) {
    for (const auto& [x, wx] : g) q.push_back({Vec2(x, y), wx * wy});
  }
  return q;
}

CellBasis cell_basis(const Mesh& m, int cell, const Vec2& xi) {
  const auto b = eval_basis(xi);
  const auto& cn = m.cells[static_cast<std::size_t>(cell)];
  Mat2 jac = Mat2::Zero();
  for (std::size_t a = 0; a < 4; ++a) {
    jac += m.nodes[static_cast<std::size_t>(cn[a])] * b.gradients[a].transpose();
  }
  const double det = jac.determinant();
  if (!(det > 0.0)) throw InvalidGeometry("cell_basis: non-positive cell Jacobian");
  const Mat2 inv_t = jac.inverse().transpose();
  CellBasis out;
  out.detJ = det;
  for (std::size_t a = 0; a < 4; ++a) {
    out.N[a] = b.values[a];
    out.dN[a] = inv_t * b.gradients[a];
  }
  return out;
}

Vec2 reference_coords(const Mesh& m, int c, const Vec2& x) {
  const Vec2& x0 = m.nodes[static_cast<std::size_t>(m.cells[static_cast<std::size_t>(c)][0])];
  return Vec2(2.0 * (x.x() - x0.x()) / m.h - 1.0, 2.0 * (x.y() - x0.y()) / m.h - 1.0);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace hfgl
