#pragma once

#include <Eigen/Dense>

#include "hfgl/mesh.hpp"

namespace hfgl {

/// Mortar matrices on the interface loop. The multiplier space is the P1
/// space of the coarse (global) trace.
///   Mcc(i, j) = int_Gamma psi_i psi_j      coarse x coarse
///   Mcf(i, b) = int_Gamma psi_i phi_b      coarse x fine
///   Mff(a, b) = int_Gamma phi_a phi_b      fine x fine
///   I         = coarse -> fine nodal interpolation (nf x nc)
struct Mortar {
  Eigen::MatrixXd Mcc;
  Eigen::MatrixXd Mcf;
  Eigen::MatrixXd Mff;
  Eigen::MatrixXd I;

  std::size_t num_coarse() const { return static_cast<std::size_t>(Mcc.rows()); }
  std::size_t num_fine() const { return static_cast<std::size_t>(Mff.rows()); }
};

/// Exact mortar integrals using two Gauss points per fine sub-edge.
Mortar assemble_mortar(const Interface& itf, const Mesh& local);

/// Kronecker product A (x) I_k.
Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& A, int k);

/// Weak continuity residual Mcc v_c - Mcf v_f for scalar trace fields.
Eigen::VectorXd continuity_residual(const Mortar& m, const Eigen::VectorXd& v_coarse, const Eigen::VectorXd& v_fine);

}  // namespace hfgl
