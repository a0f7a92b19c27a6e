#include "hfgl/mortar.hpp"

#include <stdexcept>

namespace hfgl {

Mortar assemble_mortar(const Interface& itf, const Mesh& local) {
  const auto nc = static_cast<Eigen::Index>(itf.num_coarse());
  const auto nf = static_cast<Eigen::Index>(itf.num_fine());
  if (nc == 0 || nf == 0) throw std::invalid_argument("assemble_mortar: empty interface");
  if (nf % nc != 0) throw std::invalid_argument("assemble_mortar: traces are not nested");
  const Eigen::Index s = nf / nc;

  Mortar m;
  m.Mcc = Eigen::MatrixXd::Zero(nc, nc);
  m.Mcf = Eigen::MatrixXd::Zero(nc, nf);
  m.Mff = Eigen::MatrixXd::Zero(nf, nf);
  m.I = Eigen::MatrixXd::Zero(nf, nc);
  const auto g = gauss_1d(2);

  for (Eigen::Index f = 0; f < nf; ++f) {
    const Eigen::Index k = f / s;  // parent coarse edge
    const Eigen::Index c0 = k;
    const Eigen::Index c1 = (k + 1) % nc;
    const Eigen::Index f0 = f;
    const Eigen::Index f1 = (f + 1) % nf;
    const double t0 = static_cast<double>(f % s) / static_cast<double>(s);
    const double t1 = static_cast<double>(f % s + 1) / static_cast<double>(s);
    m.I(f0, c0) = 1.0 - t0;
    m.I(f0, c1) = t0;

    const Vec2& a = local.nodes[static_cast<std::size_t>(itf.local_nodes[static_cast<std::size_t>(f0)])];
    const Vec2& b = local.nodes[static_cast<std::size_t>(itf.local_nodes[static_cast<std::size_t>(f1)])];
    const double half = 0.5 * (b - a).norm();
    for (const auto& [xi, w] : g) {
      const double phi0 = 0.5 * (1.0 - xi);
      const double phi1 = 0.5 * (1.0 + xi);
      const double t = t0 * phi0 + t1 * phi1;
      const double psi0 = 1.0 - t;
      const double psi1 = t;
      const double ww = w * half;
      m.Mff(f0, f0) += phi0 * phi0 * ww;
      m.Mff(f0, f1) += phi0 * phi1 * ww;
      m.Mff(f1, f0) += phi1 * phi0 * ww;
      m.Mff(f1, f1) += phi1 * phi1 * ww;
      m.Mcf(c0, f0) += psi0 * phi0 * ww;
      m.Mcf(c0, f1) += psi0 * phi1 * ww;
      m.Mcf(c1, f0) += psi1 * phi0 * ww;
      m.Mcf(c1, f1) += psi1 * phi1 * ww;
      m.Mcc(c0, c0) += psi0 * psi0 * ww;
      m.Mcc(c0, c1) += psi0 * psi1 * ww;
      m.Mcc(c1, c0) += psi1 * psi0 * ww;
      m.Mcc(c1, c1) += psi1 * psi1 * ww;
    }
  }
  return m;
}

Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& A, int k) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows() * k, A.cols() * k);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (A(i, j) == 0.0) continue;
      for (int c = 0; c < k; ++c) out(i * k + c, j * k + c) = A(i, j);
    }
  }
  return out;
}

Eigen::VectorXd continuity_residual(const Mortar& m, const Eigen::VectorXd& v_coarse, const Eigen::VectorXd& v_fine) {
  return m.Mcc * v_coarse - m.Mcf * v_fine;
}

}  // namespace hfgl
