#include "hfgl/adaptivity.hpp"

#include <algorithm>
#include <cmath>

#include "hfgl/log.hpp"

namespace hfgl {

std::vector<int> grow_cells(const Mesh& global, const std::vector<int>& cells, int layers) {
  std::vector<char> mark(global.num_cells(), 0);
  for (int c : cells) {
    const auto [ci, cj] = global.cell_ij[static_cast<std::size_t>(c)];
    for (int dj = -layers; dj <= layers; ++dj)
      for (int di = -layers; di <= layers; ++di) {
        const int n = global.cell_at(ci + di, cj + dj);
        if (n >= 0) mark[static_cast<std::size_t>(n)] = 1;
      }
  }
  std::vector<int> out;
  for (std::size_t c = 0; c < mark.size(); ++c)
    if (mark[c]) out.push_back(static_cast<int>(c));
  return out;
}

namespace {
bool in_outer_ring(const Mesh& global, int c) {
  const auto [i, j] = global.cell_ij[static_cast<std::size_t>(c)];
  return i == 0 || j == 0 || i == global.lattice_nx - 1 || j == global.lattice_ny - 1;
}

std::vector<int> drop_ring(const Mesh& global, const std::vector<int>& cells, bool& dropped) {
  std::vector<int> out;
  for (int c : cells) {
    if (in_outer_ring(global, c))
      dropped = true;
    else
      out.push_back(c);
  }
  return out;
}
}  // namespace

std::vector<int> clip_and_normalize(const Mesh& global, const std::vector<int>& cells, bool* clipped) {
  bool dropped = false;
  std::vector<int> cur = drop_ring(global, cells, dropped);
  // Normalizing can add pinch cells; repeat until stable away from the ring.
  for (int pass = 0; pass < 8; ++pass) {
    std::vector<int> next = normalize_footprint(global, cur);
    next = drop_ring(global, next, dropped);
    if (next == cur) break;
    cur = std::move(next);
  }
  if (dropped) log_at(1, "footprint clipped to stay off the outer boundary");
  if (clipped) *clipped = dropped;
  return cur;
}

std::vector<double> cell_qp_max(const Mesh& local, const Vec& d) {
  std::vector<double> out(local.num_cells(), 0.0);
  const auto qps = quadrature(kQuadOrder);
  for (std::size_t c = 0; c < local.num_cells(); ++c) {
    double best = -1e300;
    for (const auto& q : qps) {
      const BasisEval b = eval_basis(q.point);
      double v = 0.0;
      for (int a = 0; a < 4; ++a) v += b.values[static_cast<std::size_t>(a)] * d[local.cells[c][static_cast<std::size_t>(a)]];
      best = std::max(best, v);
    }
    out[c] = best;
  }
  return out;
}

std::vector<int> predict_marks(const Mesh& global, const LocalDomain& local, const Vec& d_L,
                               const AdaptConfig& cfg) {
  const auto qmax = cell_qp_max(local.mesh, d_L);
  std::vector<char> hot(global.num_cells(), 0);
  for (std::size_t c = 0; c < qmax.size(); ++c)
    if (qmax[c] > cfg.d_threshold) hot[static_cast<std::size_t>(local.map.parent[c])] = 1;
  std::vector<int> hot_cells;
  for (std::size_t c = 0; c < hot.size(); ++c)
    if (hot[c]) hot_cells.push_back(static_cast<int>(c));
  std::vector<int> marks;
  for (int c : grow_cells(global, hot_cells, cfg.buffer_layers))
    if (!local.map.covers(c)) marks.push_back(c);
  return marks;
}

Vec2 interpolate_u(const Mesh& m, const Vec& u, const Vec2& x) {
  const auto c = m.locate(x);
  if (!c) throw InvalidGeometry("interpolate: point outside mesh");
  const BasisEval b = eval_basis(reference_coords(m, *c, x));
  Vec2 out = Vec2::Zero();
  for (int a = 0; a < 4; ++a) {
    const int n = m.cells[static_cast<std::size_t>(*c)][static_cast<std::size_t>(a)];
    out += b.values[static_cast<std::size_t>(a)] * Vec2(u[2 * n], u[2 * n + 1]);
  }
  return out;
}

double interpolate_scalar(const Mesh& m, const Vec& f, const Vec2& x) {
  const auto c = m.locate(x);
  if (!c) throw InvalidGeometry("interpolate: point outside mesh");
  const BasisEval b = eval_basis(reference_coords(m, *c, x));
  double out = 0.0;
  for (int a = 0; a < 4; ++a)
    out += b.values[static_cast<std::size_t>(a)] * f[m.cells[static_cast<std::size_t>(*c)][static_cast<std::size_t>(a)]];
  return out;
}

namespace {

// Fields on the new local mesh: copy where a node already existed, else
// interpolate the global field and leave d at 0.
FieldState transfer_local(const Mesh& old_local, const FieldState& old_L, const Mesh& new_local, const Mesh& global,
                          const FieldState& G) {
  FieldState out;
  out.resize(new_local.num_nodes());
  for (std::size_t n = 0; n < new_local.num_nodes(); ++n) {
    const auto [i, j] = new_local.node_ij[n];
    const int o = old_local.node_at(i, j);
    const auto k = static_cast<Eigen::Index>(n);
    if (o >= 0) {
      out.u[2 * k] = old_L.u[2 * o];
      out.u[2 * k + 1] = old_L.u[2 * o + 1];
      out.p[k] = old_L.p[o];
      out.d[k] = old_L.d[o];
    } else {
      const Vec2 x = new_local.nodes[n];
      const Vec2 u = interpolate_u(global, G.u, x);
      out.u[2 * k] = u.x();
      out.u[2 * k + 1] = u.y();
      out.p[k] = interpolate_scalar(global, G.p, x);
    }
  }
  return out;
}

}  // namespace

GLState extend_local_domain(const GLState& st, const std::vector<int>& marks, const RunConfig& cfg, double dt) {
  if (marks.empty()) return st;
  const GLDomain& old = *st.dom;
  const Mesh& global = *old.global;
  std::vector<int> cells = old.footprint;
  cells.insert(cells.end(), marks.begin(), marks.end());
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  cells = clip_and_normalize(global, cells);
  // Clipping never removes old cells; keep the old footprint as a floor anyway.
  for (int c : old.footprint)
    if (!std::binary_search(cells.begin(), cells.end(), c)) throw InvalidGeometry("extension lost a footprint cell");
  if (cells == old.footprint) return st;

  auto dom = build_gl_domain(global, *old.mp, cfg, cells);
  GLState out;
  out.G = st.G;
  out.G_n = st.G_n;
  const Mesh& nl = dom->local.mesh;
  out.L = transfer_local(old.local.mesh, st.L, nl, global, st.G);
  out.L_n = transfer_local(old.local.mesh, st.L_n, nl, global, st.G_n);
  out.H_L.resize(nl.num_cells());
  for (std::size_t c = 0; c < nl.num_cells(); ++c) {
    const auto [i, j] = nl.cell_ij[c];
    const int o = old.local.mesh.cell_at(i, j);
    if (o < 0) continue;
    for (int q = 0; q < kQpPerCell; ++q)
      out.H_L.H[c * kQpPerCell + static_cast<std::size_t>(q)] =
          st.H_L.H[static_cast<std::size_t>(o) * kQpPerCell + static_cast<std::size_t>(q)];
  }
  out.lambda_C = complement_multiplier(*dom, out.G, out.G_n, dt);
  out.lambda_L = -out.lambda_C;
  out.w = out.phi = global_trace(*dom, out.G);
  out.Lambda_L = Vec::Zero(dom->nc3());
  out.Lambda_G = Vec::Zero(dom->nc3());
  out.t = st.t;
  out.dom = std::move(dom);
  return out;
}

CorrectorResult corrector_loop(const GLStepFn& step_fn, const GLState& state_n, double dt, const RunConfig& cfg,
                               std::vector<GlDiagRow>* diag) {
  CorrectorResult res;
  GLState base = state_n;
  for (int pass = 1;; ++pass) {
    GLState trial = base;
    std::vector<GlDiagRow> rows;
    res.stats = step_fn(trial, &rows);
    res.passes = pass;
    std::vector<int> marks;
    if (cfg.adapt.enabled) marks = predict_marks(*trial.dom->global, trial.dom->local, trial.L.d, cfg.adapt);
    for (auto& r : rows) r.corrector_pass = pass;

    bool accept = marks.empty();
    GLState next;
    if (!accept && pass > cfg.adapt.max_correctors) {
      log_at(1, "max_correctors=%d reached with %zu marked cells; accepting step", cfg.adapt.max_correctors,
             marks.size());
      accept = true;
    }
    if (!accept) {
      next = extend_local_domain(base, marks, cfg, dt);
      if (next.dom == base.dom) accept = true;  // every mark clipped away
    }
    if (accept) {
      if (diag) diag->insert(diag->end(), rows.begin(), rows.end());
      res.state = std::move(trial);
      return res;
    }
    const int added = static_cast<int>(next.dom->footprint.size() - base.dom->footprint.size());
    if (!rows.empty()) rows.back().cells_added = added;
    if (diag) diag->insert(diag->end(), rows.begin(), rows.end());
    res.cells_added += added;
    log_at(1, "corrector pass %d: footprint +%d cells, redoing step", pass, added);
    base = std::move(next);
  }
}

}  // namespace hfgl
