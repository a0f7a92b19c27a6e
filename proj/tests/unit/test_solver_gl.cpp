#include <gtest/gtest.h>

#include "hfgl/solver_gl.hpp"
#include "hfgl/verify.hpp"

using namespace hfgl;

namespace {

SpMat sparse(const Eigen::MatrixXd& D) { return D.sparseView(); }

struct Domain {
  RunConfig cfg;
  Mesh global;
  std::shared_ptr<GLDomain> dom;
  explicit Domain(bool notch) {
    cfg.nx = cfg.ny = 10;
    cfg.level = 2;
    if (notch) cfg.notches = {{{36, 40}, {44, 40}, 0.002}};
    cfg.material.l = 2.0 * cfg.h_local();
    cfg.material.derive();
    global = build_structured(cfg.extent, cfg.nx, cfg.ny);
    const std::vector<int> fp{44, 45, 54, 55};
    dom = build_gl_domain(global, cfg.material, cfg, fp);
  }
};

}  // namespace

TEST(Schur, ThreeSpringChainComplement) {
  const double k1 = 2.0, k2 = 3.0;
  Eigen::MatrixXd A(3, 3);
  A << k1, -k1, 0, -k1, k1 + k2, -k2, 0, -k2, k2;
  const Eigen::MatrixXd S = complement_schur(sparse(A), {1, 0, 0}, {2});
  EXPECT_NEAR(S(0, 0), k1 * k2 / (k1 + k2), 1e-14);
}

TEST(Schur, ProjectedLocalSchurIsSymmetricGalerkinProjection) {
  Domain d(true);
  GLState st = initial_gl_state(d.dom);
  AssembledSystem sys;
  d.dom->local_problem->eval_up(st.L, st.L_n, 0.1, sys, true, false);
  const Eigen::MatrixXd K = project_local_schur(sys.A, d.dom->trace_local_dofs, d.dom->mortar);
  const Eigen::MatrixXd S = schur_complement(sys.A, d.dom->trace_local_dofs);
  const Eigen::MatrixXd I3 = kron_identity(d.dom->mortar.I, 3);
  const Eigen::MatrixXd ref = I3.transpose() * S * I3;
  EXPECT_LT((K - ref).norm(), 1e-9 * ref.norm());
  // Mechanics block is symmetric; the u-p coupling blocks are not in general.
  std::vector<Eigen::Index> mech;
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    if (i % 3 != 2) mech.push_back(i);
  const Eigen::MatrixXd Km = K(mech, mech);
  EXPECT_LT((Km - Km.transpose()).norm(), 1e-10 * Km.norm());
}

TEST(Recover, LimitsAndHandCase) {
  Eigen::MatrixXd M3(2, 2);
  M3 << 2.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3;
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
  const Vec zero = Vec::Zero(2);
  EXPECT_DOUBLE_EQ(recover_global_data(Z, zero, zero, M3).norm(), 0.0);
  EXPECT_DOUBLE_EQ(recover_local_data(Z, zero, zero, M3).norm(), 0.0);
  const Vec lam(Vec2(1.0, -2.0));
  EXPECT_LT((recover_global_data(Z, Vec2(5, 6), lam, M3) + M3 * lam).norm(), 1e-15);
  EXPECT_LT((recover_local_data(Z, Vec2(5, 6), lam, M3) + M3 * lam).norm(), 1e-15);
  Eigen::MatrixXd K(2, 2);
  K << 2, 0, 0, 1;
  const Vec r = recover_global_data(K, Vec2(1, 2), Vec2(1, 1), M3);
  EXPECT_NEAR(r[0], 1.0, 1e-15);
  EXPECT_NEAR(r[1], 1.0, 1e-15);
}

TEST(Local, ZeroDataGivesZeroSolution) {
  Domain d(false);
  GLState st = initial_gl_state(d.dom);
  st.K_L = Eigen::MatrixXd::Identity(d.dom->nc3(), d.dom->nc3());
  solve_local(st, 0.1, gl_newton_options(NewtonOptions{}));
  EXPECT_DOUBLE_EQ(st.L.u.norm() + st.L.p.norm() + st.w.norm() + st.lambda_L.norm(), 0.0);
}

TEST(Local, LargeRobinStiffnessApproachesDirichletTranslation) {
  Domain d(false);
  const int nc3 = d.dom->nc3();
  Vec g = Vec::Zero(nc3);
  for (int k = 0; k < nc3; k += 3) {
    g[k] = 1e-3;
    g[k + 1] = -5e-4;
  }
  Vec prev_u;
  for (double kappa : {1e6, 1e9}) {
    GLState st = initial_gl_state(d.dom);
    st.K_L = kappa * d.cfg.material.E * d.dom->M3;
    st.Lambda_L = st.K_L * g;
    solve_local(st, 0.1, gl_newton_options(NewtonOptions{}));
    EXPECT_LT((st.w - g).norm() / g.norm(), 1e-4);
    // A rigid translation is the exact Dirichlet solution.
    for (std::size_t n = 0; n < d.dom->local.mesh.num_nodes(); ++n) {
      EXPECT_NEAR(st.L.u[static_cast<Eigen::Index>(2 * n)], 1e-3, 1e-7);
      EXPECT_NEAR(st.L.u[static_cast<Eigen::Index>(2 * n + 1)], -5e-4, 1e-7);
    }
    EXPECT_LT(st.L.p.cwiseAbs().maxCoeff(), 1e-9);
    if (prev_u.size()) EXPECT_LT((st.L.u - prev_u).norm() / prev_u.norm(), 1e-4);
    prev_u = st.L.u;
  }
}

TEST(Global, ZeroDataGivesZeroSolution) {
  Domain d(false);
  GLState st = initial_gl_state(d.dom);
  solve_global(st, 0.1, gl_newton_options(NewtonOptions{}));
  EXPECT_DOUBLE_EQ(st.G.u.norm() + st.G.p.norm() + st.lambda_C.norm(), 0.0);
}

TEST(Global, InjectedVolumePerStep) {
  Domain d(true);
  GLState st = initial_gl_state(d.dom);
  const double dt = 0.1;
  AssembledSystem sys;
  for (const PoroProblem* p : {d.dom->global_problem.get(), d.dom->local_problem.get()}) {
    const FieldState& s = p == d.dom->global_problem.get() ? st.G : st.L;
    FieldState zero = s;
    zero.u.setZero();
    zero.p.setZero();
    p->eval_up(zero, zero, dt, sys, false, false);
    double sum = 0;
    for (Eigen::Index i = 2; i < sys.r.size(); i += 3) sum += sys.r[i];
    EXPECT_NEAR(-sum, dt * 0.002, 1e-10 * dt * 0.002);
  }
}

TEST(Step, FractureFreeLoadFreeConvergesImmediately) {
  Domain d(false);
  GLState st = initial_gl_state(d.dom);
  const GLStepStats s = gl_step(st, 0.1, GLStepOptions{});
  EXPECT_EQ(s.iterations, 1);
  EXPECT_DOUBLE_EQ(s.last.phi + s.last.p + s.last.force, 0.0);
  EXPECT_DOUBLE_EQ(st.G.u.norm() + st.L.u.norm(), 0.0);
}

TEST(Step, LinearInjectionMatchesMortarTiedOracle) {
  const CheckResult r = check_gl_linear(2);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Step, DirichletNeumannReachesRobinFixedPoint) {
  const CheckResult r = check_dirichlet_neumann();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Step, MultipliersBalanceAndGlobalPhaseFieldZero) {
  Domain d(true);
  GLState st = initial_gl_state(d.dom);
  GLStepOptions opt;
  for (int k = 0; k < 3; ++k) {
    const GLStepStats s = gl_step(st, 0.1, opt);
    EXPECT_LT(s.last.force, opt.gl.gl_tol);
    EXPECT_LT(s.last.phi, opt.gl.gl_tol);
    EXPECT_LT(s.last.p, opt.gl.gl_tol);
    EXPECT_DOUBLE_EQ(st.G.d.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_GT(st.L.p.maxCoeff(), 0.0);
}

TEST(Step, NonConvergenceReportsHistory) {
  Domain d(true);
  GLState st = initial_gl_state(d.dom);
  GLStepOptions opt;
  opt.gl.gl_max_iter = 1;
  opt.gl.gl_tol = 1e-300;
  try {
    gl_step(st, 0.1, opt);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.history().size(), 1u);
  }
}

TEST(Domain, DofCountAndTraceSizes) {
  Domain d(true);
  EXPECT_EQ(d.dom->total_dofs(), 4L * static_cast<long>(d.dom->local.mesh.num_nodes()) + 3L * 121);
  EXPECT_EQ(d.dom->nc3(), 3 * 8);
  EXPECT_EQ(d.dom->fict_interior.size(), 1u);
  EXPECT_EQ(d.dom->trace_local_dofs.size(), 3u * 32u);
}
