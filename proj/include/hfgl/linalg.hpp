#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace hfgl {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, long index) : std::runtime_error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Sparse LU (UMFPACK). The symbolic analysis is kept while the sparsity
/// structure stays the same, so repeated factorizations only redo numerics.
class DirectSolver {
 public:
  DirectSolver();
  ~DirectSolver();
  DirectSolver(DirectSolver&&) noexcept;
  DirectSolver& operator=(DirectSolver&&) noexcept;

  void factorize(const SpMat& A);
  Vec solve(const Vec& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
  int factorizations() const { return factorizations_; }
  /// Size of the matrix currently factorized, or -1.
  long factored_size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int factorizations_ = 0;
};

/// One-shot direct solve with a residual check.
Vec solve_direct(const SpMat& A, const Vec& b);

struct NewtonOptions {
  double tol_abs = 1e-8;
  double tol_rel = 1e-8;
  int max_iter = 25;
  int max_cuts = 10;
  int min_iter = 0;  // iterations taken even when the initial residual already meets the target
  /// Try chord steps with the factorization left in the solver (possibly from
  /// an earlier call) before forming a new tangent.
  bool reuse_factorization = false;
};

struct NewtonResult {
  int iterations = 0;
  std::vector<double> history;  // residual norm at each iterate
};

/// eval(x, r, A): residual at x and, when A is non-null, the tangent.
/// A SingularDeformation thrown by eval triggers a step cut.
using NewtonEval = std::function<void(const Vec& x, Vec& r, SpMat* A)>;

/// Damped Newton: converged when |r| <= max(tol_abs, tol_rel |r(x0)|).
/// Each step is halved (up to max_cuts) while the residual norm grows or the
/// state is inadmissible. With reuse_factorization, a chord step is kept when
/// it halves the residual; otherwise a fresh tangent is factorized.
NewtonResult newton(const NewtonEval& eval, Vec& x, const NewtonOptions& opt, DirectSolver& solver);

/// Convenience overload with separate residual and tangent callables.
NewtonResult newton(const std::function<Vec(const Vec&)>& residual_fn,
                    const std::function<SpMat(const Vec&)>& tangent_fn, Vec& x, const NewtonOptions& opt);

/// Dense Schur complement S = A_GG - A_GI A_II^-1 A_IG onto `interface_dofs`.
Eigen::MatrixXd schur_complement(const SpMat& A, const std::vector<int>& interface_dofs);

/// S * Bmat without forming S; Bmat has one row per interface DOF.
Eigen::MatrixXd schur_complement_times(const SpMat& A, const std::vector<int>& interface_dofs,
                                       const Eigen::MatrixXd& Bmat);

}  // namespace hfgl
