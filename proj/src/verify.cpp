#include "hfgl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "hfgl/assembly.hpp"
#include "hfgl/mortar.hpp"
#include "hfgl/poro_problem.hpp"
#include "hfgl/solver_gl.hpp"
#include "hfgl/solver_single.hpp"

namespace hfgl {

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

CheckResult finish(CheckResult r, const Timer& t) {
  r.seconds = t.seconds();
  r.passed = std::isfinite(r.value) && r.value < r.tolerance;
  return r;
}

MaterialParams table_material(double l) {
  MaterialParams mp;
  mp.l = l;
  mp.derive();
  return mp;
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

// State on a 4 x 4 mesh of [0,4]^2 with an opening band across y = 2 and a
// phase field that is large there, so the fracture permeability is active.
void cracked_state(const Mesh& m, FieldState& s, FieldState& prev, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  s.resize(m.num_nodes());
  for (std::size_t n = 0; n < m.num_nodes(); ++n) {
    const Vec2 x = m.nodes[n];
    const auto k = static_cast<Eigen::Index>(n);
    s.u[2 * k] = 0.002 * U(rng) + 0.001 * x.x();
    s.u[2 * k + 1] = 0.02 * std::tanh(2.0 * (x.y() - 2.0)) + 0.002 * U(rng);
    s.p[k] = 1e-3 * (1.0 + 0.5 * U(rng));
    s.d[k] = std::clamp(std::exp(-std::abs(x.y() - 2.0)) + 0.05 * U(rng), 0.0, 1.0);
  }
  prev = s;
  for (Eigen::Index i = 0; i < prev.u.size(); ++i) prev.u[i] *= 0.9;
  prev.p *= 0.8;
}

double block_rel_err(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const double den = B.norm();
  return den == 0.0 ? (A - B).norm() : (A - B).norm() / den;
}

}  // namespace

CheckResult check_constitutive_fd(int samples, unsigned seed) {
  Timer timer;
  CheckResult r{"constitutive: first_piola vs FD of pseudo-energy", false, 0.0, 1e-5, "", 0.0};
  const MaterialParams mp = table_material(1.0);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Mat2 F = Mat2::Identity();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) F(i, j) += 0.15 * U(rng);
    if (F.determinant() < 0.5) F = Mat2::Identity() + 0.1 * (F - Mat2::Identity());
    const double p = 5e-3 * U(rng);
    const double d = 0.5 * (1.0 + U(rng));
    const double theta = theta_from_pressure(p, F.determinant(), mp);
    const Mat2 P = first_piola(F, p, d, mp);
    Mat2 Pfd;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double h = 1e-6;
        Mat2 Fp = F, Fm = F;
        Fp(i, j) += h;
        Fm(i, j) -= h;
        Pfd(i, j) = (pseudo_energy(Fp, theta, d, mp) - pseudo_energy(Fm, theta, d, mp)) / (2.0 * h);
      }
    worst = std::max(worst, (Pfd - P).norm() / std::max(P.norm(), 1e-12));
  }
  const bool g_ok = degradation(0.0) == 1.0 && degradation(1.0) == 0.0 && degradation_prime(1.0) == 0.0 &&
                    degradation_prime(0.0) < 0.0;
  r.value = g_ok ? worst : INFINITY;
  r.detail = "max rel err " + sci(worst) + (g_ok ? ", degradation constraints exact" : ", degradation constraint violated");
  return finish(r, timer);
}

CheckResult check_tangents_fd() {
  Timer timer;
  CheckResult r{"assembly: tangents vs FD of residuals (4x4)", false, 0.0, 1e-5, "", 0.0};
  const Mesh m = build_structured(Box{{0.0, 0.0}, {4.0, 4.0}}, 4, 4);
  const MaterialParams mp = table_material(1.0);
  FieldState s, prev;
  cracked_state(m, s, prev, 11);
  PoroLoads loads;
  loads.lines.push_back({{1.0, 2.0}, {3.0, 2.0}, 0.002});
  PoroInputs in;
  in.mesh = &m;
  in.mp = &mp;
  in.prev = &prev;
  in.loads = &loads;
  in.dt = 0.1;
  in.h_e = m.h;
  const SparsePattern pat(m, 3);
  AssembledSystem sys;
  in.state = &s;
  assemble_poro(in, PoroBlocks::both, pat, sys, true);
  const Eigen::MatrixXd A(sys.A);
  const Vec x0 = pack_up(s);
  const auto n = x0.size();
  Eigen::MatrixXd Afd(n, n);
  FieldState work = s;
  in.state = &work;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = (j % 3 == 2) ? 1e-7 : 1e-8;
    Vec xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    unpack_up(xp, work);
    assemble_poro(in, PoroBlocks::both, pat, sys, false);
    const Vec rp = sys.r;
    unpack_up(xm, work);
    assemble_poro(in, PoroBlocks::both, pat, sys, false);
    Afd.col(j) = (rp - sys.r) / (2.0 * h);
  }
  std::vector<Eigen::Index> mech, pres;
  for (Eigen::Index i = 0; i < n; ++i) (i % 3 == 2 ? pres : mech).push_back(i);
  const double e_mech = block_rel_err(A(mech, Eigen::all), Afd(mech, Eigen::all));
  const double e_pres = block_rel_err(A(pres, Eigen::all), Afd(pres, Eigen::all));

  HistoryState H;
  H.resize(m.num_cells());
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1e-5);
  for (double& h : H.H) h = U(rng);
  const SparsePattern dpat(m, 1);
  SpMat Ad;
  Vec bd;
  assemble_phasefield(m, H, mp, dpat, Ad, bd);
  const Eigen::MatrixXd Add(Ad);
  Eigen::MatrixXd Adfd(s.d.size(), s.d.size());
  for (Eigen::Index j = 0; j < s.d.size(); ++j) {
    const double h = 1e-4;
    Vec dp = s.d, dm = s.d;
    dp[j] += h;
    dm[j] -= h;
    Adfd.col(j) = (phasefield_residual(m, dp, H, mp) - phasefield_residual(m, dm, H, mp)) / (2.0 * h);
  }
  const double e_d = block_rel_err(Add, Adfd);
  r.value = std::max({e_mech, e_pres, e_d});
  r.detail = "mechanics " + sci(e_mech) + ", pressure " + sci(e_pres) + ", phase field " + sci(e_d);
  return finish(r, timer);
}

CheckResult check_phasefield_closed_form() {
  Timer timer;
  CheckResult r{"phase field: uniform history closed form", false, 0.0, 1e-10, "", 0.0};
  const Mesh m = build_structured(Box{{0.0, 0.0}, {8.0, 8.0}}, 8, 8);
  const MaterialParams mp = table_material(1.0);
  PoroProblem prob(m, mp, m.h);
  HistoryState H;
  H.resize(m.num_cells());
  const double Hval = 3.0 * mp.psi_c;
  for (double& h : H.H) h = Hval;
  const Vec d = prob.solve_phasefield(H);
  const double expect = Hval / (mp.psi_c + Hval);
  r.value = (d.array() - expect).abs().maxCoeff();
  r.detail = "max |d - H/(psi_c+H)| = " + sci(r.value);
  return finish(r, timer);
}

CheckResult check_sealed_box() {
  Timer timer;
  CheckResult r{"poroelastic: sealed box dp = M dt r_F", false, 0.0, 1e-8, "", 0.0};
  const Mesh m = build_structured(Box{{0.0, 0.0}, {4.0, 4.0}}, 4, 4);
  const MaterialParams mp = table_material(1.0);
  PoroProblem prob(m, mp, m.h);
  const std::vector<Side> all{Side::left, Side::right, Side::bottom, Side::top};
  prob.fix_sides(all, {});
  prob.use_phasefield = false;
  prob.loads.r_F = 1e-3;
  prob.loads.source_cells.assign(m.num_cells(), 1);
  SingleScaleState st = initial_state(prob);
  TimeConfig tc;
  const double dt = 0.1;
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Vec p_before = st.s.p;
    step_single(prob, st, dt, tc, NewtonOptions{});
    const double expect = mp.M * dt * prob.loads.r_F;
    worst = std::max(worst, ((st.s.p - p_before).array() - expect).abs().maxCoeff() / expect);
  }
  r.value = worst;
  r.detail = "max rel err " + sci(worst) + " over 3 steps";
  return finish(r, timer);
}

namespace {

struct LinearSetup {
  RunConfig cfg;
  Mesh global;
  MaterialParams mp;
  std::shared_ptr<GLDomain> dom;
};

std::unique_ptr<LinearSetup> linear_setup() {
  auto s = std::make_unique<LinearSetup>();
  s->cfg.nx = s->cfg.ny = 10;
  s->cfg.level = 2;
  s->cfg.notches = {{{36.0, 40.0}, {44.0, 40.0}, 0.002}};
  s->mp = table_material(2.0 * s->cfg.h_local());
  s->global = build_structured(s->cfg.extent, s->cfg.nx, s->cfg.ny);
  // 2 x 2 cells around the notch
  const std::vector<int> fp{44, 45, 54, 55};
  s->dom = build_gl_domain(s->global, s->mp, s->cfg, fp);
  return s;
}

GLState frozen_state(const std::shared_ptr<GLDomain>& dom) {
  GLState st = initial_gl_state(dom);
  st.L.d.setZero();
  st.L_n.d.setZero();
  return st;
}

double rel(const Vec& a, const Vec& b) {
  const double den = b.norm();
  return den == 0.0 ? (a - b).norm() : (a - b).norm() / den;
}

// Relative difference of u and p on the complement nodes and on the local mesh.
double field_distance(const GLDomain& dom, const FieldState& G1, const FieldState& L1, const FieldState& G2,
                      const FieldState& L2) {
  std::vector<char> fict(dom.global->num_nodes(), 0);
  for (int g : dom.fict_interior) fict[static_cast<std::size_t>(g)] = 1;
  std::vector<Eigen::Index> un, pn;
  for (std::size_t g = 0; g < fict.size(); ++g) {
    if (fict[g]) continue;
    un.push_back(static_cast<Eigen::Index>(2 * g));
    un.push_back(static_cast<Eigen::Index>(2 * g + 1));
    pn.push_back(static_cast<Eigen::Index>(g));
  }
  return std::max({rel(G1.u(un), G2.u(un)), rel(G1.p(pn), G2.p(pn)), rel(L1.u, L2.u), rel(L1.p, L2.p)});
}

}  // namespace

CheckResult check_gl_linear(int steps) {
  Timer timer;
  CheckResult r{"gl: linear fixed point equals mortar-tied monolithic solve", false, 0.0, 1e-6, "", 0.0};
  auto setup = linear_setup();
  GLState st = frozen_state(setup->dom);
  GLStepOptions opt;
  opt.freeze_d = true;
  double worst = 0.0;
  int iters = 0;
  for (int k = 0; k < steps; ++k) {
    const GLState start = st;
    iters = std::max(iters, gl_step(st, 0.1, opt).iterations);
    const MortarTiedSolution ref = solve_mortar_tied(start, 0.1, gl_newton_options(opt.newton));
    worst = std::max(worst, field_distance(*st.dom, st.G, st.L, ref.G, ref.L));
  }
  r.value = worst;
  r.detail = "max rel diff " + sci(worst) + ", GL iterations per step <= " + std::to_string(iters);
  return finish(r, timer);
}

CheckResult check_dirichlet_neumann() {
  Timer timer;
  CheckResult r{"gl: Dirichlet-Neumann variant reaches the Robin fixed point", false, 0.0, 1e-6, "", 0.0};
  auto setup = linear_setup();
  GLState robin = frozen_state(setup->dom);
  GLState dn = robin;
  GLStepOptions opt;
  opt.freeze_d = true;
  GLStepOptions opt_dn = opt;
  opt_dn.coupling = GLCoupling::dirichlet_neumann;
  opt_dn.gl.gl_tol = 1e-8;
  const int it_robin = gl_step(robin, 0.1, opt).iterations;
  const int it_dn = gl_step(dn, 0.1, opt_dn).iterations;
  r.value = field_distance(*robin.dom, dn.G, dn.L, robin.G, robin.L);
  r.detail = "rel diff " + sci(r.value) + "; iterations Robin " + std::to_string(it_robin) + ", DN " +
             std::to_string(it_dn);
  return finish(r, timer);
}

CheckResult check_mortar_identities() {
  Timer timer;
  CheckResult r{"mortar: partition of unity and nesting identity", false, 0.0, 1e-12, "", 0.0};
  const Mesh g = build_structured(Box{{0.0, 0.0}, {6.0, 6.0}}, 6, 6);
  // L-shaped footprint of three cells
  const std::vector<int> fp{14, 15, 20};
  const LocalDomain ld = refine_footprint(g, fp, 2);
  const Mortar m = assemble_mortar(ld.interface, ld.mesh);
  const double len = ld.interface.length(g);
  const double e1 = std::abs(m.Mcc.sum() - len) / len;
  const double e2 = std::abs(m.Mcf.sum() - len) / len;
  const double e3 = std::abs(m.Mff.sum() - len) / len;
  // Coarse basis is the interpolated fine basis: Mcf = I^T Mff.
  const double e4 = (m.Mcf - m.I.transpose() * m.Mff).norm() / m.Mcf.norm();
  r.value = std::max({e1, e2, e3, e4});
  r.detail = "max rel err " + sci(r.value);
  return finish(r, timer);
}

std::vector<CheckResult> run_verify_suite() {
  return {check_constitutive_fd(), check_tangents_fd(),    check_phasefield_closed_form(),
          check_sealed_box(),      check_mortar_identities(), check_gl_linear(),
          check_dirichlet_neumann()};
}

}  // namespace hfgl
