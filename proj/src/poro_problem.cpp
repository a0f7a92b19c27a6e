#include "hfgl/poro_problem.hpp"

#include <algorithm>
#include <cmath>

namespace hfgl {

std::vector<int> notch_nodes(const Mesh& mesh, const std::vector<Notch>& notches) {
  std::vector<int> out;
  const double tol = mesh.h * (1.0 - 1e-9);
  for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
    for (const auto& nt : notches) {
      if (point_segment_distance(mesh.nodes[n], nt.a, nt.b) < tol) {
        out.push_back(static_cast<int>(n));
        break;
      }
    }
  }
  return out;
}

namespace {
// Liang-Barsky test of a segment against a closed, slightly inflated box.
bool segment_meets_box(const Vec2& a, const Vec2& b, const Vec2& lo, const Vec2& hi) {
  const double eps = 1e-9 * (hi - lo).norm();
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec2 d = b - a;
  for (int k = 0; k < 2; ++k) {
    const double lo_k = lo[k] - eps;
    const double hi_k = hi[k] + eps;
    if (std::abs(d[k]) < 1e-300) {
      if (a[k] < lo_k || a[k] > hi_k) return false;
      continue;
    }
    double ta = (lo_k - a[k]) / d[k];
    double tb = (hi_k - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}
}  // namespace

std::vector<char> notch_cells(const Mesh& mesh, const std::vector<Notch>& notches) {
  std::vector<char> out(mesh.num_cells(), 0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const Vec2& lo = mesh.nodes[static_cast<std::size_t>(mesh.cells[c][0])];
    const Vec2& hi = mesh.nodes[static_cast<std::size_t>(mesh.cells[c][2])];
    for (const auto& nt : notches) {
      if (segment_meets_box(nt.a, nt.b, lo, hi)) {
        out[c] = 1;
        break;
      }
    }
  }
  return out;
}

Vec pack_up(const FieldState& s) {
  const auto n = static_cast<Eigen::Index>(s.num_nodes());
  Vec x(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[3 * i] = s.u[2 * i];
    x[3 * i + 1] = s.u[2 * i + 1];
    x[3 * i + 2] = s.p[i];
  }
  return x;
}

void unpack_up(const Vec& x, FieldState& s) {
  const auto n = static_cast<Eigen::Index>(s.num_nodes());
  for (Eigen::Index i = 0; i < n; ++i) {
    s.u[2 * i] = x[3 * i];
    s.u[2 * i + 1] = x[3 * i + 1];
    s.p[i] = x[3 * i + 2];
  }
}

PoroProblem::PoroProblem(const Mesh& mesh, const MaterialParams& mp, double h_e)
    : mesh_(&mesh), mp_(&mp), h_e_(h_e), up_pattern_(mesh, 3), d_pattern_(mesh, 1) {
  fixed_up.assign(3 * mesh.num_nodes(), 0);
  fixed_d.assign(mesh.num_nodes(), 0);
  d_value = Vec::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
}

void PoroProblem::fix_sides(std::span<const Side> u_sides, std::span<const Side> p_sides) {
  for (int n : mesh_->nodes_on_sides(u_sides)) fix_node_up(n, true, false);
  for (int n : mesh_->nodes_on_sides(p_sides)) fix_node_up(n, false, true);
}

void PoroProblem::fix_node_up(int node, bool u, bool p) {
  if (u) {
    fixed_up[static_cast<std::size_t>(3 * node)] = 1;
    fixed_up[static_cast<std::size_t>(3 * node + 1)] = 1;
  }
  if (p) fixed_up[static_cast<std::size_t>(3 * node + 2)] = 1;
}

void PoroProblem::set_notches(const std::vector<Notch>& notches, bool apply_dirichlet) {
  loads.lines.clear();
  for (const auto& nt : notches) {
    if (nt.f_bar != 0.0) loads.lines.push_back({nt.a, nt.b, nt.f_bar});
  }
  loads.source_cells = notch_cells(*mesh_, notches);
  if (apply_dirichlet) {
    for (int n : notch_nodes(*mesh_, notches)) {
      fixed_d[static_cast<std::size_t>(n)] = 1;
      d_value[n] = 1.0;
    }
  }
}

Vec PoroProblem::solve_phasefield(const HistoryState& history) {
  SpMat A;
  Vec b;
  assemble_phasefield(*mesh_, history, *mp_, d_pattern_, A, b);
  apply_dirichlet_rows(A, b, fixed_d);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (fixed_d[static_cast<std::size_t>(i)]) b[i] = d_value[i];
  }
  d_solver_.factorize(A);
  return d_solver_.solve(b);
}

PoroInputs PoroProblem::inputs(const FieldState& s, const FieldState& prev, double dt) const {
  PoroInputs in;
  in.mesh = mesh_;
  in.mp = mp_;
  in.state = &s;
  in.prev = &prev;
  in.loads = &loads;
  in.dt = dt;
  in.h_e = h_e_;
  in.use_phasefield = use_phasefield;
  in.mech_cells = mech_cells.empty() ? nullptr : &mech_cells;
  in.pres_cells = pres_cells.empty() ? nullptr : &pres_cells;
  return in;
}

void PoroProblem::eval_up(const FieldState& s, const FieldState& prev, double dt, AssembledSystem& sys,
                          bool tangent, bool dirichlet) const {
  assemble_poro(inputs(s, prev, dt), PoroBlocks::both, up_pattern_, sys, tangent);
  if (!dirichlet) return;
  if (tangent) {
    apply_dirichlet_rows(sys.A, sys.r, fixed_up);
  } else {
    for (Eigen::Index i = 0; i < sys.r.size(); ++i) {
      if (fixed_up[static_cast<std::size_t>(i)]) sys.r[i] = 0.0;
    }
  }
}

NewtonResult PoroProblem::solve_up(FieldState& s, const FieldState& prev, double dt, const NewtonOptions& opt) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_up: dt must be positive");
  Vec x = pack_up(s);
  FieldState work = s;
  AssembledSystem sys;
  NewtonEval eval = [&](const Vec& xx, Vec& r, SpMat* A) {
    unpack_up(xx, work);
    eval_up(work, prev, dt, sys, A != nullptr);
    r = sys.r;
    if (A) A->swap(sys.A);
  };
  NewtonResult res = newton(eval, x, opt, up_solver_);
  unpack_up(x, s);
  return res;
}

}  // namespace hfgl
