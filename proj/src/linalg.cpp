#include "hfgl/linalg.hpp"

#include <Eigen/UmfPackSupport>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include "hfgl/constitutive.hpp"

extern "C" char* openblas_get_corename(void) __attribute__((weak));

namespace {

// OpenBLAS 0.3.20 picks its Cooperlake/SkylakeX kernels on some virtualized
// Xeons, and their dgemm output is wrong there: UMFPACK then reports SPD
// matrices as singular. The kernel family is fixed when OpenBLAS loads, so the
// process re-executes itself once with the Haswell family pinned.
// HFGL_KEEP_BLAS_CORE=1 disables this.
__attribute__((constructor)) void pin_openblas_core() {
  if (!openblas_get_corename || std::getenv("OPENBLAS_CORETYPE") || std::getenv("HFGL_KEEP_BLAS_CORE")) return;
  const char* core = openblas_get_corename();
  if (!core || (std::strstr(core, "Cooperlake") == nullptr && std::strstr(core, "SkylakeX") == nullptr &&
                std::strstr(core, "SapphireRapids") == nullptr))
    return;
  if (!__builtin_cpu_supports("avx2")) return;
  std::ifstream f("/proc/self/cmdline", std::ios::binary);
  const std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.empty()) return;
  std::vector<std::string> args;
  std::size_t start = 0;
  while (start < raw.size()) {
    const std::size_t end = raw.find('\0', start);
    args.push_back(raw.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  setenv("OPENBLAS_CORETYPE", "Haswell", 1);
  execv("/proc/self/exe", argv.data());
  // exec failed: carry on with the default kernels
}

}  // namespace

namespace hfgl {

struct DirectSolver::Impl {
  Eigen::UmfPackLU<SpMat> lu;
  Eigen::Index rows = -1;
  Eigen::Index nnz = -1;
  std::vector<int> outer;
  std::vector<int> inner;
  bool analyzed = false;
  bool valid = false;  // holds a usable numeric factorization
  SpMat held;

  bool same_structure(const SpMat& A) const {
    if (!analyzed || A.rows() != rows || A.nonZeros() != nnz) return false;
    if (!std::equal(outer.begin(), outer.end(), A.outerIndexPtr())) return false;
    return std::equal(inner.begin(), inner.end(), A.innerIndexPtr());
  }
};

DirectSolver::DirectSolver() : impl_(std::make_unique<Impl>()) {}
DirectSolver::~DirectSolver() = default;
DirectSolver::DirectSolver(DirectSolver&&) noexcept = default;
DirectSolver& DirectSolver::operator=(DirectSolver&&) noexcept = default;

namespace {
long first_zero_pivot(const Eigen::UmfPackLU<SpMat>& lu) {
  const auto& U = lu.matrixU();
  const auto& Q = lu.permutationQ();
  for (Eigen::Index k = 0; k < U.rows(); ++k) {
    if (U.coeff(k, k) == 0.0) return static_cast<long>(Q.size() > k ? Q(k) : k);
  }
  return -1;
}
}  // namespace

void DirectSolver::factorize(const SpMat& A) {
  if (A.rows() != A.cols()) throw SolverError("DirectSolver: matrix is not square", -1);
  if (!A.isCompressed()) throw SolverError("DirectSolver: matrix must be compressed", -1);
  Impl& s = *impl_;
  // UMFPACK reads the matrix again during solves, so the solver owns a copy.
  s.held = A;
  if (!s.same_structure(A)) {
    s.lu.analyzePattern(s.held);
    if (s.lu.info() != Eigen::Success) throw SolverError("DirectSolver: symbolic analysis failed", -1);
    s.rows = A.rows();
    s.nnz = A.nonZeros();
    s.outer.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
    s.inner.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
    s.analyzed = true;
  }
  s.valid = false;
  s.lu.factorize(s.held);
  ++factorizations_;
  s.valid = s.lu.info() == Eigen::Success;
  if (!s.valid) {
    const long idx = first_zero_pivot(s.lu);
    std::ostringstream os;
    os << "DirectSolver: singular pivot at column " << idx;
    throw SolverError(os.str(), idx);
  }
}

long DirectSolver::factored_size() const { return impl_->valid ? static_cast<long>(impl_->rows) : -1; }

Vec DirectSolver::solve(const Vec& b) const {
  Vec x = impl_->lu.solve(b);
  return x;
}

Eigen::MatrixXd DirectSolver::solve(const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd X(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) X.col(j) = impl_->lu.solve(Vec(B.col(j)));
  return X;
}

Vec solve_direct(const SpMat& A, const Vec& b) {
  SpMat Ac = A;
  Ac.makeCompressed();
  DirectSolver s;
  s.factorize(Ac);
  Vec x = s.solve(b);
  const double res = (Ac * x - b).norm();
  if (!std::isfinite(res) || res > 1e-10 * (b.norm() + 1.0)) {
    // one step of iterative refinement before giving up
    x += s.solve(Vec(b - Ac * x));
    const double res2 = (Ac * x - b).norm();
    if (!std::isfinite(res2) || res2 > 1e-10 * (b.norm() + 1.0))
      throw SolverError("solve_direct: residual check failed", -1);
  }
  return x;
}

NewtonResult newton(const NewtonEval& eval, Vec& x, const NewtonOptions& opt, DirectSolver& solver) {
  NewtonResult res;
  const bool lazy = opt.reuse_factorization;
  Vec r;
  SpMat A;
  bool have_A = !lazy;
  eval(x, r, lazy ? nullptr : &A);
  double rn = r.norm();
  if (!std::isfinite(rn)) throw NonConvergence("newton: non-finite initial residual", {rn});
  res.history.push_back(rn);
  const double target = std::max(opt.tol_abs, opt.tol_rel * rn);
  Vec r_try;
  SpMat A_try;
  // A chord step with the factorization already in the solver is accepted
  // when it reduces the residual at least this much.
  constexpr double kChordContraction = 0.5;
  bool chord_ok = lazy;
  while (rn > target || (res.iterations < opt.min_iter && rn > 0.0)) {
    if (res.iterations >= opt.max_iter) {
      std::ostringstream os;
      os << "newton: no convergence in " << opt.max_iter << " iterations, |r| = " << rn;
      throw NonConvergence(os.str(), res.history);
    }
    if (chord_ok && solver.factored_size() == x.size()) {
      const Vec x_try = x + solver.solve(Vec(-r));
      bool good = false;
      try {
        eval(x_try, r_try, nullptr);
        const double rn_try = r_try.norm();
        good = std::isfinite(rn_try) && rn_try <= kChordContraction * rn;
        if (good) {
          x = x_try;
          r.swap(r_try);
          rn = rn_try;
          have_A = false;
        }
      } catch (const SingularDeformation&) {
      }
      if (good) {
        ++res.iterations;
        res.history.push_back(rn);
        continue;
      }
    }
    if (!have_A) eval(x, r, &A);
    A.makeCompressed();
    solver.factorize(A);
    const Vec dx = solver.solve(Vec(-r));
    double alpha = 1.0;
    bool accepted = false;
    bool evaluable = false;
    Vec x_best;
    double rn_best = 0.0;
    for (int cut = 0; cut <= opt.max_cuts; ++cut, alpha *= 0.5) {
      const Vec x_try = x + alpha * dx;
      try {
        eval(x_try, r_try, lazy ? nullptr : &A_try);
      } catch (const SingularDeformation&) {
        continue;
      }
      const double rn_try = r_try.norm();
      if (!std::isfinite(rn_try)) continue;
      if (!evaluable || rn_try < rn_best) {
        evaluable = true;
        x_best = x_try;
        rn_best = rn_try;
      }
      if (rn_try <= rn) {
        x = x_try;
        r.swap(r_try);
        if (!lazy) A.swap(A_try);
        rn = rn_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!evaluable) throw NonConvergence("newton: line search found no admissible state", res.history);
      // Take the least bad step; the residual may rise before quadratic convergence sets in.
      x = x_best;
      eval(x, r, lazy ? nullptr : &A);
      rn = r.norm();
    }
    have_A = !lazy;
    // After a full Newton step with line search the fresh factorization is
    // usually a good chord operator again.
    chord_ok = lazy && accepted && alpha == 1.0;
    ++res.iterations;
    res.history.push_back(rn);
  }
  return res;
}

NewtonResult newton(const std::function<Vec(const Vec&)>& residual_fn,
                    const std::function<SpMat(const Vec&)>& tangent_fn, Vec& x, const NewtonOptions& opt) {
  DirectSolver solver;
  NewtonEval eval = [&](const Vec& xx, Vec& r, SpMat* A) {
    r = residual_fn(xx);
    if (A) *A = tangent_fn(xx);
  };
  return newton(eval, x, opt, solver);
}

namespace {

struct Partition {
  std::vector<int> bulk;
  std::vector<int> where;  // dof -> position in bulk, or -(1 + position in interface)
};

Partition partition(Eigen::Index n, const std::vector<int>& iface) {
  Partition p;
  p.where.assign(static_cast<std::size_t>(n), 0);
  std::vector<char> is_if(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < iface.size(); ++k) {
    const int d = iface[k];
    if (d < 0 || d >= n || is_if[static_cast<std::size_t>(d)])
      throw std::invalid_argument("schur_complement: invalid or repeated interface dof");
    is_if[static_cast<std::size_t>(d)] = 1;
    p.where[static_cast<std::size_t>(d)] = -(1 + static_cast<int>(k));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!is_if[static_cast<std::size_t>(i)]) {
      p.where[static_cast<std::size_t>(i)] = static_cast<int>(p.bulk.size());
      p.bulk.push_back(static_cast<int>(i));
    }
  }
  return p;
}

struct Blocks {
  SpMat II;
  Eigen::MatrixXd IG;
  Eigen::MatrixXd GI;
  Eigen::MatrixXd GG;
};

Blocks split(const SpMat& A, const std::vector<int>& iface) {
  if (A.rows() != A.cols()) throw std::invalid_argument("schur_complement: matrix is not square");
  const Partition p = partition(A.rows(), iface);
  const auto nb = static_cast<Eigen::Index>(p.bulk.size());
  const auto ng = static_cast<Eigen::Index>(iface.size());
  Blocks b;
  b.IG = Eigen::MatrixXd::Zero(nb, ng);
  b.GI = Eigen::MatrixXd::Zero(ng, nb);
  b.GG = Eigen::MatrixXd::Zero(ng, ng);
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < A.outerSize(); ++col) {
    const int wc = p.where[static_cast<std::size_t>(col)];
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      const int wr = p.where[static_cast<std::size_t>(it.row())];
      if (wr >= 0 && wc >= 0) {
        trip.emplace_back(wr, wc, it.value());
      } else if (wr >= 0) {
        b.IG(wr, -wc - 1) += it.value();
      } else if (wc >= 0) {
        b.GI(-wr - 1, wc) += it.value();
      } else {
        b.GG(-wr - 1, -wc - 1) += it.value();
      }
    }
  }
  b.II.resize(nb, nb);
  b.II.setFromTriplets(trip.begin(), trip.end());
  b.II.makeCompressed();
  return b;
}

}  // namespace

Eigen::MatrixXd schur_complement(const SpMat& A, const std::vector<int>& interface_dofs) {
  const auto ng = static_cast<Eigen::Index>(interface_dofs.size());
  return schur_complement_times(A, interface_dofs, Eigen::MatrixXd::Identity(ng, ng));
}

Eigen::MatrixXd schur_complement_times(const SpMat& A, const std::vector<int>& interface_dofs,
                                       const Eigen::MatrixXd& Bmat) {
  if (Bmat.rows() != static_cast<Eigen::Index>(interface_dofs.size()))
    throw std::invalid_argument("schur_complement_times: dimension mismatch");
  const Blocks b = split(A, interface_dofs);
  if (b.II.rows() == 0) return b.GG * Bmat;
  DirectSolver s;
  try {
    s.factorize(b.II);
  } catch (const SolverError& e) {
    throw SolverError(std::string("schur_complement: singular bulk block (") + e.what() + ")", e.index());
  }
  const Eigen::MatrixXd X = s.solve(Eigen::MatrixXd(b.IG * Bmat));
  return b.GG * Bmat - b.GI * X;
}

}  // namespace hfgl
