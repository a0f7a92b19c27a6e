#include "hfgl/solver_gl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

#include "hfgl/adaptivity.hpp"
#include "hfgl/log.hpp"
#include "hfgl/solver_single.hpp"

namespace hfgl {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void append_sparse(Triplets& t, const SpMat& A, int row0, int col0, double scale = 1.0) {
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it)
      t.emplace_back(row0 + static_cast<int>(it.row()), col0 + col, scale * it.value());
}

void append_sparse_transposed(Triplets& t, const SpMat& A, int row0, int col0, double scale = 1.0) {
  for (int col = 0; col < A.outerSize(); ++col)
    for (SpMat::InnerIterator it(A, col); it; ++it)
      t.emplace_back(row0 + col, col0 + static_cast<int>(it.row()), scale * it.value());
}

void append_dense(Triplets& t, const Eigen::MatrixXd& A, int row0, int col0) {
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (A(i, j) != 0.0) t.emplace_back(row0 + static_cast<int>(i), col0 + static_cast<int>(j), A(i, j));
}

Vec gather(const Vec& x, const std::vector<int>& dofs) {
  Vec out(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) out[static_cast<Eigen::Index>(k)] = x[dofs[k]];
  return out;
}

// Mortar-weighted norm of the u (comps 0,1) or p (comp 2) part of an interface vector.
double field_norm(const Eigen::MatrixXd& Mcc, const Vec& v, bool pressure) {
  const auto nc = Mcc.rows();
  double acc = 0.0;
  for (int c = 0; c < kTraceComps; ++c) {
    if ((c == 2) != pressure) continue;
    Vec comp(nc);
    for (Eigen::Index i = 0; i < nc; ++i) comp[i] = v[kTraceComps * i + c];
    acc += comp.dot(Mcc * comp);
  }
  return std::sqrt(std::max(acc, 0.0));
}

double plain_field_norm(const Vec& v, bool pressure) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if ((i % kTraceComps == 2) == pressure) acc += v[i] * v[i];
  return std::sqrt(acc);
}

}  // namespace

long GLDomain::total_dofs() const {
  return 4L * static_cast<long>(local.mesh.num_nodes()) + 3L * static_cast<long>(global->num_nodes());
}

std::shared_ptr<GLDomain> build_gl_domain(const Mesh& global, const MaterialParams& mp, const RunConfig& cfg,
                                          std::span<const int> footprint) {
  auto dom = std::make_shared<GLDomain>();
  dom->global = &global;
  dom->mp = &mp;
  dom->footprint.assign(footprint.begin(), footprint.end());
  std::sort(dom->footprint.begin(), dom->footprint.end());
  dom->local = refine_footprint(global, dom->footprint, cfg.level);
  dom->mortar = assemble_mortar(dom->local.interface, dom->local.mesh);
  const Interface& itf = dom->local.interface;

  dom->complement_cells.assign(global.num_cells(), 1);
  for (int c : dom->footprint) dom->complement_cells[static_cast<std::size_t>(c)] = 0;

  std::vector<char> on_trace(global.num_nodes(), 0);
  for (int g : itf.global_nodes) on_trace[static_cast<std::size_t>(g)] = 1;
  std::set<int> inner;
  for (int c : dom->footprint)
    for (int n : global.cells[static_cast<std::size_t>(c)])
      if (!on_trace[static_cast<std::size_t>(n)]) inner.insert(n);
  dom->fict_interior.assign(inner.begin(), inner.end());
  for (int g : dom->fict_interior) {
    const int l = local_node_of_global(dom->local, global, g);
    if (l < 0) throw InvalidGeometry("fictitious node without a coincident local node");
    dom->fict_interior_local.push_back(l);
  }

  for (int g : itf.global_nodes)
    for (int c = 0; c < kTraceComps; ++c) dom->trace_global_dofs.push_back(kTraceComps * g + c);
  for (int l : itf.local_nodes)
    for (int c = 0; c < kTraceComps; ++c) dom->trace_local_dofs.push_back(kTraceComps * l + c);

  const Mortar& m = dom->mortar;
  dom->M3 = kron_identity(m.Mcc, kTraceComps);
  dom->M3_ldlt.compute(dom->M3);
  const Eigen::MatrixXd P = m.Mcc.ldlt().solve(m.Mcf);
  dom->P3 = kron_identity(P, kTraceComps);
  const int nL3 = kTraceComps * static_cast<int>(dom->local.mesh.num_nodes());
  Triplets tf;
  for (Eigen::Index i = 0; i < m.Mcf.rows(); ++i)
    for (Eigen::Index b = 0; b < m.Mcf.cols(); ++b) {
      if (m.Mcf(i, b) == 0.0) continue;
      for (int c = 0; c < kTraceComps; ++c)
        tf.emplace_back(kTraceComps * static_cast<int>(i) + c,
                        kTraceComps * itf.local_nodes[static_cast<std::size_t>(b)] + c, m.Mcf(i, b));
    }
  dom->Tf.resize(dom->nc3(), nL3);
  dom->Tf.setFromTriplets(tf.begin(), tf.end());
  dom->Tf.makeCompressed();

  auto& gp = dom->global_problem;
  gp = std::make_unique<PoroProblem>(global, mp, global.h);
  gp->fix_sides(cfg.u_fixed, cfg.p_fixed);
  for (int g : itf.global_nodes) gp->fix_node_up(g, true, true);
  for (int g : dom->fict_interior) gp->fix_node_up(g, true, false);
  gp->use_phasefield = false;
  gp->mech_cells = dom->complement_cells;
  gp->set_notches(cfg.notches, false);
  gp->loads.r_F = cfg.r_F;
  gp->loads.tractions = cfg.tractions;

  auto& cp = dom->complement_problem;
  cp = std::make_unique<PoroProblem>(global, mp, global.h);
  cp->fix_sides(cfg.u_fixed, cfg.p_fixed);
  for (int g : dom->fict_interior) cp->fix_node_up(g, true, true);
  cp->use_phasefield = false;
  cp->mech_cells = dom->complement_cells;
  cp->pres_cells = dom->complement_cells;
  cp->loads.tractions = cfg.tractions;

  auto& lp = dom->local_problem;
  lp = std::make_unique<PoroProblem>(dom->local.mesh, mp, dom->local.mesh.h);
  lp->set_notches(cfg.notches, true);
  lp->loads.r_F = cfg.r_F;
  return dom;
}

GLState initial_gl_state(std::shared_ptr<GLDomain> dom) {
  GLState st;
  st.G.resize(dom->global->num_nodes());
  st.G_n = st.G;
  st.L.resize(dom->local.mesh.num_nodes());
  const auto& lp = *dom->local_problem;
  for (Eigen::Index i = 0; i < st.L.d.size(); ++i)
    if (lp.fixed_d[static_cast<std::size_t>(i)]) st.L.d[i] = lp.d_value[i];
  st.L_n = st.L;
  st.H_L.resize(dom->local.mesh.num_cells());
  const Vec zero = Vec::Zero(dom->nc3());
  st.w = st.phi = st.lambda_L = st.lambda_C = st.Lambda_L = st.Lambda_G = zero;
  st.dom = std::move(dom);
  return st;
}

Eigen::MatrixXd complement_schur(const SpMat& A_complement_tangent, const std::vector<char>& fixed,
                                 const std::vector<int>& trace_dofs) {
  SpMat A = A_complement_tangent;
  Vec dummy = Vec::Zero(A.rows());
  apply_dirichlet_rows(A, dummy, fixed);
  return schur_complement(A, trace_dofs);
}

Eigen::MatrixXd project_local_schur(const SpMat& A_local_tangent, const std::vector<int>& fine_trace_dofs,
                                    const Mortar& m) {
  const int k = static_cast<int>(fine_trace_dofs.size() / m.num_fine());
  const Eigen::MatrixXd SI = schur_complement_times(A_local_tangent, fine_trace_dofs, kron_identity(m.I, k));
  const Eigen::MatrixXd Mff = kron_identity(m.Mff, k);
  return kron_identity(m.Mcf, k) * Mff.ldlt().solve(SI);
}

void decouple_fields(Eigen::MatrixXd& K) {
  for (Eigen::Index j = 0; j < K.cols(); ++j)
    for (Eigen::Index i = 0; i < K.rows(); ++i)
      if ((i % kTraceComps == 2) != (j % kTraceComps == 2)) K(i, j) = 0.0;
}

void compute_augmented_stiffness(GLState& st, double dt, const GLConfig& cfg) {
  const GLDomain& dom = *st.dom;
  AssembledSystem sys;
  dom.complement_problem->eval_up(st.G, st.G_n, dt, sys, true, false);
  st.K_L = complement_schur(sys.A, dom.complement_problem->fixed_up, dom.trace_global_dofs);
  dom.local_problem->eval_up(st.L, st.L_n, dt, sys, true, false);
  st.K_G = project_local_schur(sys.A, dom.trace_local_dofs, dom.mortar);
  if (!cfg.coupled_robin) {
    decouple_fields(st.K_L);
    decouple_fields(st.K_G);
  }
  st.stiffness_ready = true;
  st.stiffness_dt = dt;
}

Vec recover_global_data(const Eigen::MatrixXd& K_G, const Vec& x_L_trace, const Vec& lambda_L,
                        const Eigen::MatrixXd& M3) {
  return K_G * x_L_trace - M3 * lambda_L;
}

Vec recover_local_data(const Eigen::MatrixXd& K_L, const Vec& x_G_trace, const Vec& lambda_C,
                       const Eigen::MatrixXd& M3) {
  return K_L * x_G_trace - M3 * lambda_C;
}

Vec global_trace(const GLDomain& dom, const FieldState& G) {
  const auto& nodes = dom.local.interface.global_nodes;
  Vec x(dom.nc3());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int g = nodes[k];
    const auto i = static_cast<Eigen::Index>(kTraceComps * k);
    x[i] = G.u[2 * g];
    x[i + 1] = G.u[2 * g + 1];
    x[i + 2] = G.p[g];
  }
  return x;
}

Vec local_trace_coarse(const GLDomain& dom, const FieldState& L) {
  return dom.P3 * gather(pack_up(L), dom.trace_local_dofs);
}

NewtonResult solve_local(GLState& st, double dt, const NewtonOptions& opt) {
  GLDomain& dom = *st.dom;
  const PoroProblem& lp = *dom.local_problem;
  const int n1 = kTraceComps * static_cast<int>(dom.local.mesh.num_nodes());
  const int nc3 = dom.nc3();
  const int n = n1 + 2 * nc3;
  Vec z(n);
  z.head(n1) = pack_up(st.L);
  z.segment(n1, nc3) = st.lambda_L;
  z.tail(nc3) = st.w;
  FieldState work = st.L;
  AssembledSystem sys;
  const SpMat TfT = dom.Tf.transpose();
  NewtonEval eval = [&](const Vec& zz, Vec& r, SpMat* A) {
    unpack_up(zz.head(n1), work);
    lp.eval_up(work, st.L_n, dt, sys, A != nullptr, true);
    const Vec lam = zz.segment(n1, nc3);
    const Vec w = zz.tail(nc3);
    r.resize(n);
    r.head(n1) = sys.r - TfT * lam;
    r.segment(n1, nc3) = dom.M3 * lam + st.K_L * w - st.Lambda_L;
    r.tail(nc3) = dom.M3 * w - dom.Tf * zz.head(n1);
    if (!A) return;
    Triplets t;
    t.reserve(static_cast<std::size_t>(sys.A.nonZeros()) + 2 * dom.Tf.nonZeros() +
              3 * static_cast<std::size_t>(nc3) * static_cast<std::size_t>(nc3));
    append_sparse(t, sys.A, 0, 0);
    append_sparse_transposed(t, dom.Tf, 0, n1, -1.0);
    append_dense(t, dom.M3, n1, n1);
    append_dense(t, st.K_L, n1, n1 + nc3);
    append_sparse(t, dom.Tf, n1 + nc3, 0, -1.0);
    append_dense(t, dom.M3, n1 + nc3, n1 + nc3);
    A->resize(n, n);
    A->setFromTriplets(t.begin(), t.end());
    A->makeCompressed();
  };
  NewtonResult res = newton(eval, z, opt, dom.local_solver);
  unpack_up(z.head(n1), st.L);
  st.lambda_L = z.segment(n1, nc3);
  st.w = z.tail(nc3);
  return res;
}

Vec complement_multiplier(const GLDomain& dom, const FieldState& G, const FieldState& G_n, double dt) {
  AssembledSystem sys;
  dom.complement_problem->eval_up(G, G_n, dt, sys, false, false);
  return dom.M3_ldlt.solve(gather(sys.r, dom.trace_global_dofs));
}

NewtonResult solve_global(GLState& st, double dt, const NewtonOptions& opt) {
  GLDomain& dom = *st.dom;
  const auto& nodes = dom.local.interface.global_nodes;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int g = nodes[k];
    const auto i = static_cast<Eigen::Index>(kTraceComps * k);
    st.G.u[2 * g] = st.w[i];
    st.G.u[2 * g + 1] = st.w[i + 1];
    st.G.p[g] = st.w[i + 2];
  }
  for (std::size_t k = 0; k < dom.fict_interior.size(); ++k) {
    const int g = dom.fict_interior[k];
    const int l = dom.fict_interior_local[k];
    st.G.u[2 * g] = st.L.u[2 * l];
    st.G.u[2 * g + 1] = st.L.u[2 * l + 1];
  }
  NewtonResult res = dom.global_problem->solve_up(st.G, st.G_n, dt, opt);
  st.lambda_C = complement_multiplier(dom, st.G, st.G_n, dt);
  return res;
}

Imbalance trace_imbalance(const GLDomain& dom, const Vec& a, const Vec& b, const Vec& lambda_C,
                          const Vec& lambda_L, double floor_u, double floor_p) {
  const Eigen::MatrixXd& Mcc = dom.mortar.Mcc;
  const Vec diff = a - b;
  auto rel = [](double num, double den) {
    if (num == 0.0) return 0.0;
    return num / std::max(den, 1e-300);
  };
  Imbalance out;
  out.phi = rel(field_norm(Mcc, diff, false), std::max(field_norm(Mcc, b, false), floor_u));
  out.p = rel(field_norm(Mcc, diff, true), std::max(field_norm(Mcc, b, true), floor_p));
  const Vec sum = dom.M3 * (lambda_C + lambda_L);
  const Vec mL = dom.M3 * lambda_L;
  const Vec mC = dom.M3 * lambda_C;
  for (bool pressure : {false, true}) {
    const double den = std::max(plain_field_norm(mL, pressure), plain_field_norm(mC, pressure));
    out.force = std::max(out.force, rel(plain_field_norm(sum, pressure), den));
  }
  return out;
}

namespace {

// Global Neumann solve of the Dirichlet-Neumann variant: complement only,
// the local multiplier enters as a nodal load on the trace.
NewtonResult solve_global_neumann(GLState& st, double dt, const NewtonOptions& opt) {
  GLDomain& dom = *st.dom;
  const PoroProblem& cp = *dom.complement_problem;
  const Vec load = dom.M3 * st.lambda_L;
  Vec x = pack_up(st.G);
  FieldState work = st.G;
  AssembledSystem sys;
  NewtonEval eval = [&](const Vec& xx, Vec& r, SpMat* A) {
    unpack_up(xx, work);
    cp.eval_up(work, st.G_n, dt, sys, A != nullptr, true);
    for (std::size_t k = 0; k < dom.trace_global_dofs.size(); ++k)
      sys.r[dom.trace_global_dofs[k]] += load[static_cast<Eigen::Index>(k)];
    r = sys.r;
    if (A) A->swap(sys.A);
  };
  NewtonResult res = newton(eval, x, opt, dom.aux_solver);
  unpack_up(x, st.G);
  st.lambda_C = complement_multiplier(dom, st.G, st.G_n, dt);
  return res;
}

// Penalty Robin matrix kappa * M3 with kappa scaled per field from the
// complement stiffness, so the local side sees the global trace as Dirichlet data.
Eigen::MatrixXd penalty_matrix(const GLDomain& dom, const Eigen::MatrixXd& S_C) {
  double su = 0.0, sp = 0.0;
  for (Eigen::Index i = 0; i < S_C.rows(); ++i) {
    if (i % kTraceComps == 2)
      sp = std::max(sp, std::abs(S_C(i, i)));
    else
      su = std::max(su, std::abs(S_C(i, i)));
  }
  const double m = dom.mortar.Mcc.diagonal().maxCoeff();
  Eigen::MatrixXd K = dom.M3;
  for (Eigen::Index j = 0; j < K.cols(); ++j) {
    const double kappa = 1e6 * ((j % kTraceComps == 2) ? sp : su) / m;
    K.col(j) *= kappa;
  }
  return K;
}

// Pseudo-inverse of K_G after Jacobi scaling, dropping singular values below
// 1e-3 of the largest. The floating local domain gives K_G three rigid-body
// modes; under prestress the rotation mode is only approximately singular.
Eigen::MatrixXd scaled_pinv(const Eigen::MatrixXd& K) {
  Vec D = K.diagonal().cwiseAbs();
  for (Eigen::Index i = 0; i < D.size(); ++i) D[i] = D[i] > 0.0 ? 1.0 / std::sqrt(D[i]) : 1.0;
  const Eigen::MatrixXd S = D.asDiagonal() * K * D.asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec sv = svd.singularValues();
  Vec inv = Vec::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-3 * sv[0]) inv[i] = 1.0 / sv[i];
  return D.asDiagonal() * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * D.asDiagonal();
}

double field_floor(const FieldState& L, bool pressure, double length) {
  const double scale = pressure ? L.p.cwiseAbs().maxCoeff() : L.u.cwiseAbs().maxCoeff();
  return 1e-10 * scale * std::sqrt(length);
}

}  // namespace

NewtonOptions gl_newton_options(const NewtonOptions& base) {
  // Interface data changes by small amounts between iterations; the local and
  // global solves must still react to them.
  NewtonOptions o = base;
  o.tol_abs = base.tol_abs * 1e-4;
  o.min_iter = std::max(base.min_iter, 1);
  return o;
}

GLStepStats gl_step(GLState& st_io, double dt, const GLStepOptions& opt_in, std::vector<GlDiagRow>* diag) {
  if (!(dt > 0.0)) throw std::invalid_argument("gl_step: dt must be positive");
  GLStepOptions opt = opt_in;
  opt.newton = gl_newton_options(opt_in.newton);
  GLState st = st_io;
  GLDomain& dom = *st.dom;
  const bool dn = opt.coupling == GLCoupling::dirichlet_neumann;
  st.G_n = st_io.G;
  st.L_n = st_io.L;

  const bool refresh = !st.stiffness_ready || opt.gl.aug_refresh == AugRefresh::per_step || st.stiffness_dt != dt;
  if (refresh) compute_augmented_stiffness(st, dt, opt.gl);
  if (dn) {
    st.K_L = penalty_matrix(dom, st.K_L);
    st.K_G.setZero();
    st.stiffness_ready = false;  // the stored matrices are no longer the Schur complements
  }
  st.lambda_C = complement_multiplier(dom, st.G, st.G_n, dt);
  Vec g = global_trace(dom, st.G);  // trace data handed to the local problem
  st.Lambda_L = recover_local_data(st.K_L, g, st.lambda_C, dom.M3);

  const double length = dom.mortar.Mcc.sum();
  const Eigen::MatrixXd KG_pinv = dn ? Eigen::MatrixXd() : scaled_pinv(st.K_G);
  const HistoryState& H_n = st_io.H_L;
  HistoryState H_trial = H_n;
  const int max_iter = dn ? opt.dn_max_iter : opt.gl.gl_max_iter;
  std::vector<double> hist;
  GLStepStats stats;
  const MaterialParams& mp = *dom.mp;

  for (int k = 1; k <= max_iter; ++k) {
    const FieldState before = st.L;
    const int inner_max = opt.gl.inner_up_loop ? opt.time.stagger_max : 1;
    for (int inner = 0; inner < inner_max; ++inner) {
      const FieldState inner_before = st.L;
      if (!opt.freeze_d) {
        const auto D = driving_state(dom.local.mesh, st.L.u, mp);
        for (std::size_t q = 0; q < D.size(); ++q) H_trial.H[q] = update_history(H_n.H[q], D[q]);
        st.L.d = dom.local_problem->solve_phasefield(H_trial);
      }
      solve_local(st, dt, opt.newton);
      if (relative_change(st.L, inner_before) < opt.time.stagger_tol) break;
    }

    Imbalance imb;
    if (dn) {
      solve_global_neumann(st, dt, opt.newton);
      st.phi = global_trace(dom, st.G);
      imb = trace_imbalance(dom, st.phi, st.w, st.lambda_C, st.lambda_L, field_floor(st.L, false, length),
                            field_floor(st.L, true, length));
      g = opt.dn_relaxation * st.phi + (1.0 - opt.dn_relaxation) * g;
      st.Lambda_L = recover_local_data(st.K_L, g, st.lambda_C, dom.M3);
    } else {
      const Vec xL = local_trace_coarse(dom, st.L);
      st.Lambda_G = recover_global_data(st.K_G, xL, st.lambda_L, dom.M3);
      solve_global(st, dt, opt.newton);
      // Trace that satisfies the global Robin rows for the recovered multiplier.
      const Vec rhs = st.Lambda_G - dom.M3 * st.lambda_C - st.K_G * st.w;
      const Vec delta = KG_pinv * rhs;
      st.phi = st.w + delta;
      imb = trace_imbalance(dom, st.phi, st.w, st.lambda_C, st.lambda_L, field_floor(st.L, false, length),
                            field_floor(st.L, true, length));
      st.Lambda_L = recover_local_data(st.K_L, global_trace(dom, st.G), st.lambda_C, dom.M3);
    }

    const double change = relative_change(st.L, before);
    hist.push_back(std::max({imb.phi, imb.p, imb.force}));
    stats.iterations = k;
    stats.last = imb;
    if (diag) {
      GlDiagRow row;
      row.k = k;
      row.imbalance_phi = imb.phi;
      row.imbalance_p = imb.p;
      row.force_imbalance = imb.force;
      diag->push_back(row);
    }
    log_at(2, "  gl k=%d imb_u=%.3e imb_p=%.3e force=%.3e change=%.3e", k, imb.phi, imb.p, imb.force, change);
    const bool balanced = imb.phi < opt.gl.gl_tol && imb.p < opt.gl.gl_tol && imb.force < opt.gl.gl_tol;
    if (balanced && change < opt.time.stagger_tol) {
      st.H_L = std::move(H_trial);
      st.t += dt;
      st_io = std::move(st);
      return stats;
    }
  }
  throw NonConvergence("gl_step: global-local iteration did not converge in " + std::to_string(max_iter) +
                           " iterations",
                       hist);
}

namespace {

GLStepStats gl_step_recursive(GLState& st, double dt, const GLStepOptions& opt, std::vector<GlDiagRow>* diag,
                              int depth) {
  const GLState backup = st;
  const std::size_t diag_size = diag ? diag->size() : 0;
  try {
    return gl_step(st, dt, opt, diag);
  } catch (const std::runtime_error& e) {
    st = backup;
    if (diag) diag->resize(diag_size);
    if (depth >= opt.time.max_halvings) throw;
    log_at(1, "gl step rejected at dt=%.4g (%s); halving", dt, e.what());
    GLStepStats a = gl_step_recursive(st, 0.5 * dt, opt, diag, depth + 1);
    GLStepStats b = gl_step_recursive(st, 0.5 * dt, opt, diag, depth + 1);
    st.G_n = backup.G;
    st.L_n = backup.L;
    GLStepStats out;
    out.iterations = a.iterations + b.iterations;
    out.last = b.last;
    out.halvings = 1 + std::max(a.halvings, b.halvings);
    return out;
  }
}

}  // namespace

GLStepStats gl_step_adaptive_dt(GLState& st, double dt, const GLStepOptions& opt, std::vector<GlDiagRow>* diag) {
  return gl_step_recursive(st, dt, opt, diag, 0);
}

MortarTiedSolution solve_mortar_tied(const GLState& st, double dt, const NewtonOptions& opt) {
  const GLDomain& dom = *st.dom;
  const PoroProblem& cp = *dom.complement_problem;
  const PoroProblem& lp = *dom.local_problem;
  const int nG = kTraceComps * static_cast<int>(dom.global->num_nodes());
  const int nL = kTraceComps * static_cast<int>(dom.local.mesh.num_nodes());
  const int nc3 = dom.nc3();
  const int n = nG + nL + nc3;

  SpMat E(nc3, nG);  // trace extraction of the global unknowns
  {
    Triplets t;
    for (int k = 0; k < nc3; ++k) t.emplace_back(k, dom.trace_global_dofs[static_cast<std::size_t>(k)], 1.0);
    E.setFromTriplets(t.begin(), t.end());
  }
  const SpMat M3s = dom.M3.sparseView();
  const SpMat M3E = M3s * E;     // nc3 x nG
  const SpMat TfT = dom.Tf.transpose();

  const FieldState G_prev = st.G;
  const FieldState L_prev = st.L;
  FieldState G = st.G;
  FieldState L = st.L;
  Vec z(n);
  z.head(nG) = pack_up(G);
  z.segment(nG, nL) = pack_up(L);
  z.tail(nc3) = -st.lambda_C;
  AssembledSystem sg, sl;
  NewtonEval eval = [&](const Vec& zz, Vec& r, SpMat* A) {
    unpack_up(zz.head(nG), G);
    unpack_up(zz.segment(nG, nL), L);
    cp.eval_up(G, G_prev, dt, sg, A != nullptr, true);
    lp.eval_up(L, L_prev, dt, sl, A != nullptr, true);
    const Vec lam = zz.tail(nc3);
    r.resize(n);
    r.head(nG) = sg.r + Vec(M3E.transpose() * lam);
    // fixed rows of the global system stay pinned
    for (int i = 0; i < nG; ++i)
      if (cp.fixed_up[static_cast<std::size_t>(i)]) r[i] = 0.0;
    r.segment(nG, nL) = sl.r - TfT * lam;
    r.tail(nc3) = M3E * zz.head(nG) - dom.Tf * zz.segment(nG, nL);
    if (!A) return;
    Triplets t;
    append_sparse(t, sg.A, 0, 0);
    for (int col = 0; col < M3E.outerSize(); ++col)
      for (SpMat::InnerIterator it(M3E, col); it; ++it) {
        if (!cp.fixed_up[static_cast<std::size_t>(col)]) t.emplace_back(col, nG + nL + static_cast<int>(it.row()), it.value());
        t.emplace_back(nG + nL + static_cast<int>(it.row()), col, it.value());
      }
    append_sparse(t, sl.A, nG, nG);
    append_sparse_transposed(t, dom.Tf, nG, nG + nL, -1.0);
    append_sparse(t, dom.Tf, nG + nL, nG, -1.0);
    A->resize(n, n);
    A->setFromTriplets(t.begin(), t.end());
    A->makeCompressed();
  };
  DirectSolver solver;
  newton(eval, z, opt, solver);
  unpack_up(z.head(nG), G);
  unpack_up(z.segment(nG, nL), L);
  return {G, L};
}

std::vector<int> initial_footprint(const Mesh& global, const RunConfig& cfg) {
  std::vector<int> cells = cfg.initial_footprint;
  if (cells.empty()) {
    const auto nc = notch_cells(global, cfg.notches);
    for (std::size_t c = 0; c < nc.size(); ++c)
      if (nc[c]) cells.push_back(static_cast<int>(c));
    if (cells.empty()) throw InvalidGeometry("initial footprint: no notch cells and no explicit footprint");
    cells = grow_cells(global, cells, cfg.adapt.buffer_layers);
  }
  return clip_and_normalize(global, cells);
}

std::unique_ptr<GLRun> setup_gl(const RunConfig& cfg) {
  auto run = std::make_unique<GLRun>();
  run->global = build_structured(cfg.extent, cfg.nx, cfg.ny);
  run->mp = cfg.material;
  auto dom = build_gl_domain(run->global, run->mp, cfg, initial_footprint(run->global, cfg));
  run->state = initial_gl_state(std::move(dom));
  return run;
}

TimeSeries run_gl(const RunConfig& cfg, const GLObserver& observer) {
  auto run = setup_gl(cfg);
  TimeSeries ts;
  std::vector<GlDiagRow> diag;
  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir);
  GLStepOptions opt;
  opt.time = cfg.time;
  opt.newton = cfg.newton;
  opt.gl = cfg.gl;
  const int steps = num_steps(cfg.time);
  for (int n = 1; n <= steps; ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t first_row = diag.size();
    CorrectorResult res = corrector_loop(
        [&](GLState& s, std::vector<GlDiagRow>* rows) { return gl_step_adaptive_dt(s, cfg.time.dt, opt, rows); },
        run->state, cfg.time.dt, cfg, &diag);
    for (std::size_t i = first_row; i < diag.size(); ++i) diag[i].step = n;
    run->state = std::move(res.state);
    run->state.t = n * cfg.time.dt;
    run->footprint_history.push_back(run->state.dom->footprint);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    SeriesRow row;
    row.t = run->state.t;
    row.p_crack_max = crack_pressure_max(run->state.L);
    row.total_dofs = run->state.dom->total_dofs();
    row.gl_iters = res.stats.iterations;
    row.wall_ms = ms;
    ts.rows.push_back(row);
    log_at(1, "gl step %d t=%.3f p_crack=%.6e gl_iters=%d passes=%d cells=%zu dofs=%ld (%.0f ms)", n, row.t,
           row.p_crack_max, row.gl_iters, res.passes, run->state.dom->footprint.size(), row.total_dofs, ms);
    if (observer) observer(n, *run);
    if (write) {
      write_series_csv(ts, cfg.output_dir + "/series.csv");
      write_gl_diag_csv(diag, cfg.output_dir + "/gl_diag.csv");
      if (cfg.snapshot_stride > 0 && n % cfg.snapshot_stride == 0) {
        write_vtk(*run->state.dom->global, run->state.G, cfg.output_dir + "/global_" + std::to_string(n) + ".vtk");
        write_vtk(run->state.dom->local.mesh, run->state.L,
                  cfg.output_dir + "/local_" + std::to_string(n) + ".vtk");
      }
    }
  }
  return ts;
}

}  // namespace hfgl
