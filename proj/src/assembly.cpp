#include "hfgl/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hfgl {

SparsePattern::SparsePattern(const Mesh& mesh, int per_node) : per_node_(per_node) {
  const int n = static_cast<int>(mesh.num_nodes()) * per_node;
  const int nb = cell_block();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_cells() * static_cast<std::size_t>(nb * nb));
  auto dof = [&](const std::array<int, 4>& cn, int la) {
    return cn[static_cast<std::size_t>(la / per_node)] * per_node + la % per_node;
  };
  for (const auto& cn : mesh.cells) {
    for (int a = 0; a < nb; ++a) {
      for (int b = 0; b < nb; ++b) trip.emplace_back(dof(cn, a), dof(cn, b), 0.0);
    }
  }
  zero_.resize(n, n);
  zero_.setFromTriplets(trip.begin(), trip.end());
  zero_.makeCompressed();
  offsets_.resize(mesh.num_cells() * static_cast<std::size_t>(nb * nb));
  const int* outer = zero_.outerIndexPtr();
  const int* inner = zero_.innerIndexPtr();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& cn = mesh.cells[c];
    for (int a = 0; a < nb; ++a) {
      const int row = dof(cn, a);
      for (int b = 0; b < nb; ++b) {
        const int col = dof(cn, b);
        const int* lo = inner + outer[col];
        const int* hi = inner + outer[col + 1];
        const int* it = std::lower_bound(lo, hi, row);
        offsets_[c * static_cast<std::size_t>(nb * nb) + static_cast<std::size_t>(a * nb + b)] =
            static_cast<int>(it - inner);
      }
    }
  }
}

QpKinematics qp_kinematics(const CellBasis& cb, const std::array<int, 4>& nodes, const FieldState& s) {
  QpKinematics k;
  k.F = Mat2::Identity();
  k.p = 0.0;
  k.d = 0.0;
  k.grad_p.setZero();
  k.grad_d.setZero();
  for (std::size_t a = 0; a < 4; ++a) {
    const auto n = static_cast<Eigen::Index>(nodes[a]);
    const Vec2 ua(s.u[2 * n], s.u[2 * n + 1]);
    k.F += ua * cb.dN[a].transpose();
    k.p += cb.N[a] * s.p[n];
    k.d += cb.N[a] * s.d[n];
    k.grad_p += s.p[n] * cb.dN[a];
    k.grad_d += s.d[n] * cb.dN[a];
  }
  return k;
}

namespace {

Mat2 deformation_gradient(const CellBasis& cb, const std::array<int, 4>& nodes, const Vec& u) {
  Mat2 F = Mat2::Identity();
  for (std::size_t a = 0; a < 4; ++a) {
    const auto n = static_cast<Eigen::Index>(nodes[a]);
    F += Vec2(u[2 * n], u[2 * n + 1]) * cb.dN[a].transpose();
  }
  return F;
}

[[noreturn]] void report_singular(std::size_t cell, const char* what) {
  std::ostringstream os;
  os << what << ": non-positive Jacobian in cell " << cell;
  throw SingularDeformation(os.str());
}

}  // namespace

void assemble_poro(const PoroInputs& in, PoroBlocks blocks, const SparsePattern& pattern,
                   AssembledSystem& out, bool tangent) {
  const Mesh& mesh = *in.mesh;
  const MaterialParams& mp = *in.mp;
  const FieldState& s = *in.state;
  const FieldState& sn = *in.prev;
  const bool do_mech = blocks != PoroBlocks::pressure;
  const bool do_pres = blocks != PoroBlocks::mechanics;
  const double dt = in.dt;
  const double kscale = kPaPerGPa;

  const auto n = static_cast<Eigen::Index>(3 * mesh.num_nodes());
  out.r = Vec::Zero(n);
  if (tangent) {
    out.A = pattern.zero_matrix();
  }
  out.labels.assign(static_cast<std::size_t>(n), DofKind::bulk);
  double* values = tangent ? out.A.valuePtr() : nullptr;

  const auto qps = quadrature(kQuadOrder);
  Eigen::Matrix<double, 12, 12> ke;
  Eigen::Matrix<double, 12, 1> re;
  const bool has_source = in.loads && in.loads->r_F != 0.0 && !in.loads->source_cells.empty();

  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const bool mech = do_mech && (!in.mech_cells || (*in.mech_cells)[c]);
    const bool pres = do_pres && (!in.pres_cells || (*in.pres_cells)[c]);
    if (!mech && !pres) continue;
    const auto& cn = mesh.cells[c];
    ke.setZero();
    re.setZero();
    for (const auto& q : qps) {
      const CellBasis cb = cell_basis(mesh, static_cast<int>(c), q.point);
      const double w = q.weight * cb.detJ;
      QpKinematics k = qp_kinematics(cb, cn, s);
      if (!in.use_phasefield) {
        k.d = 0.0;
        k.grad_d.setZero();
      }
      const double J = k.F.determinant();
      if (!(J > 0.0)) report_singular(c, "assemble_poro");
      const Mat2 Fit = k.F.inverse().transpose();

      if (mech) {
        const Mat2 P = first_piola(k.F, k.p, k.d, mp);
        Mat4 A;
        Mat2 dPdp;
        if (tangent) {
          A = first_piola_tangent(k.F, k.p, k.d, mp);
          dPdp = -mp.B * J * Fit;
        }
        for (int a = 0; a < 4; ++a) {
          const Vec2& ga = cb.dN[static_cast<std::size_t>(a)];
          for (int i = 0; i < 2; ++i) {
            re(3 * a + i) += (P(i, 0) * ga.x() + P(i, 1) * ga.y()) * w;
            if (!tangent) continue;
            for (int b = 0; b < 4; ++b) {
              const Vec2& gb = cb.dN[static_cast<std::size_t>(b)];
              for (int kk = 0; kk < 2; ++kk) {
                double v = 0.0;
                for (int j = 0; j < 2; ++j) {
                  for (int l = 0; l < 2; ++l) v += A(2 * i + j, 2 * kk + l) * ga[j] * gb[l];
                }
                ke(3 * a + i, 3 * b + kk) += v * w;
              }
              ke(3 * a + i, 3 * b + 2) +=
                  (dPdp(i, 0) * ga.x() + dPdp(i, 1) * ga.y()) * cb.N[static_cast<std::size_t>(b)] * w;
            }
          }
        }
      }

      if (pres) {
        const Mat2 Fn = deformation_gradient(cb, cn, sn.u);
        const double Jn = Fn.determinant();
        double p_n = 0.0;
        for (std::size_t a = 0; a < 4; ++a) p_n += cb.N[a] * sn.p[static_cast<Eigen::Index>(cn[a])];
        const Mat2 K = permeability(k.F, k.d, k.grad_d, in.h_e, mp);
        double src = 0.0;
        if (has_source && in.loads->source_cells[c]) src = in.loads->r_F;
        const double storage = (k.p - p_n) / mp.M + mp.B * (J - Jn) - dt * src;
        const Vec2 flux = dt * kscale * (K * k.grad_p);
        std::array<Mat2, 4> dK{};
        if (tangent) dK = permeability_dF(k.F, k.d, k.grad_d, in.h_e, mp);
        for (int a = 0; a < 4; ++a) {
          const double Na = cb.N[static_cast<std::size_t>(a)];
          const Vec2& ga = cb.dN[static_cast<std::size_t>(a)];
          re(3 * a + 2) += (storage * Na + flux.dot(ga)) * w;
          if (!tangent) continue;
          for (int b = 0; b < 4; ++b) {
            const double Nb = cb.N[static_cast<std::size_t>(b)];
            const Vec2& gb = cb.dN[static_cast<std::size_t>(b)];
            ke(3 * a + 2, 3 * b + 2) += (Na * Nb / mp.M + dt * kscale * ga.dot(K * gb)) * w;
            for (int kk = 0; kk < 2; ++kk) {
              double v = 0.0;
              for (int l = 0; l < 2; ++l) {
                // dJ/dF_kl = J F^-T_kl
                v += mp.B * J * Fit(kk, l) * gb[l] * Na;
                v += dt * kscale * ga.dot(dK[static_cast<std::size_t>(2 * kk + l)] * k.grad_p) * gb[l];
              }
              ke(3 * a + 2, 3 * b + kk) += v * w;
            }
          }
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      for (int i = 0; i < 3; ++i) out.r[3 * cn[static_cast<std::size_t>(a)] + i] += re(3 * a + i);
    }
    if (tangent) {
      const int* off = pattern.cell_offsets(static_cast<int>(c));
      for (int a = 0; a < 12; ++a) {
        for (int b = 0; b < 12; ++b) values[off[a * 12 + b]] += ke(a, b);
      }
    }
  }

  if (!in.loads) return;
  if (do_pres && !in.loads->lines.empty()) {
    const Vec q = line_source_vector(mesh, in.loads->lines);
    for (std::size_t a = 0; a < mesh.num_nodes(); ++a) {
      out.r[static_cast<Eigen::Index>(3 * a + 2)] -= dt * q[static_cast<Eigen::Index>(a)];
    }
  }
  if (do_mech && !in.loads->tractions.empty()) {
    const auto g = gauss_1d(2);
    for (const auto& e : mesh.boundary) {
      for (const auto& t : in.loads->tractions) {
        if (t.side != e.side) continue;
        if (in.mech_cells && !(*in.mech_cells)[static_cast<std::size_t>(e.cell)]) continue;
        const Vec2& x0 = mesh.nodes[static_cast<std::size_t>(e.nodes[0])];
        const Vec2& x1 = mesh.nodes[static_cast<std::size_t>(e.nodes[1])];
        const double half = 0.5 * (x1 - x0).norm();
        for (const auto& [xi, wq] : g) {
          const double N0 = 0.5 * (1.0 - xi);
          const double N1 = 0.5 * (1.0 + xi);
          for (int i = 0; i < 2; ++i) {
            out.r[3 * e.nodes[0] + i] -= t.t[i] * N0 * wq * half;
            out.r[3 * e.nodes[1] + i] -= t.t[i] * N1 * wq * half;
          }
        }
      }
    }
  }
}

Vec line_source_vector(const Mesh& mesh, const std::vector<LineSource>& lines) {
  Vec q = Vec::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  const auto g = gauss_1d(2);
  for (const auto& ls : lines) {
    const double L = (ls.b - ls.a).norm();
    if (L <= 0.0 || ls.rate == 0.0) continue;
    const double density = ls.rate / L;
    // Sub-segments no longer than a quarter cell so every piece lies in one cell.
    const int nsub = std::max(1, static_cast<int>(std::ceil(4.0 * L / mesh.h)));
    for (int k = 0; k < nsub; ++k) {
      const Vec2 p0 = ls.a + (ls.b - ls.a) * (static_cast<double>(k) / nsub);
      const Vec2 p1 = ls.a + (ls.b - ls.a) * (static_cast<double>(k + 1) / nsub);
      const Vec2 mid = 0.5 * (p0 + p1);
      const double half = 0.5 * (p1 - p0).norm();
      for (const auto& [xi, wq] : g) {
        const Vec2 x = mid + 0.5 * xi * (p1 - p0);
        const auto c = mesh.locate(x);
        if (!c) continue;
        const auto b = eval_basis(reference_coords(mesh, *c, x));
        const auto& cn = mesh.cells[static_cast<std::size_t>(*c)];
        for (std::size_t a = 0; a < 4; ++a) q[cn[a]] += density * b.values[a] * wq * half;
      }
    }
  }
  return q;
}

std::vector<double> driving_state(const Mesh& mesh, const Vec& u, const MaterialParams& mp) {
  const auto qps = quadrature(kQuadOrder);
  std::vector<double> D(mesh.num_cells() * kQpPerCell, 0.0);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    for (std::size_t q = 0; q < qps.size(); ++q) {
      const CellBasis cb = cell_basis(mesh, static_cast<int>(c), qps[q].point);
      const Mat2 F = deformation_gradient(cb, mesh.cells[c], u);
      if (!(F.determinant() > 0.0)) report_singular(c, "driving_state");
      D[c * kQpPerCell + q] = crack_driving_state(F, mp);
    }
  }
  return D;
}

void assemble_phasefield(const Mesh& mesh, const HistoryState& history, const MaterialParams& mp,
                         const SparsePattern& pattern, SpMat& A, Vec& b) {
  const auto qps = quadrature(kQuadOrder);
  A = pattern.zero_matrix();
  b = Vec::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  double* values = A.valuePtr();
  const double l2 = mp.l * mp.l;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& cn = mesh.cells[c];
    Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
    for (std::size_t q = 0; q < qps.size(); ++q) {
      const double H = history.H[c * kQpPerCell + q];
      if (H < 0.0) throw std::invalid_argument("assemble_phasefield: negative history value");
      const CellBasis cb = cell_basis(mesh, static_cast<int>(c), qps[q].point);
      const double w = qps[q].weight * cb.detJ;
      for (std::size_t a = 0; a < 4; ++a) {
        ke(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) += (2.0 * mp.psi_c + 2.0 * H) * cb.N[a] * w;
        b[cn[a]] += 2.0 * H * cb.N[a] * w;
        for (std::size_t bb = 0; bb < 4; ++bb) {
          ke(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(bb)) +=
              2.0 * mp.psi_c * l2 * cb.dN[a].dot(cb.dN[bb]) * w;
        }
      }
    }
    const int* off = pattern.cell_offsets(static_cast<int>(c));
    for (int a = 0; a < 4; ++a) {
      for (int bb = 0; bb < 4; ++bb) values[off[a * 4 + bb]] += ke(a, bb);
    }
  }
}

Vec phasefield_residual(const Mesh& mesh, const Vec& d, const HistoryState& history, const MaterialParams& mp) {
  SparsePattern pattern(mesh, 1);
  SpMat A;
  Vec b;
  assemble_phasefield(mesh, history, mp, pattern, A, b);
  return A * d - b;
}

void apply_dirichlet_rows(SpMat& A, Vec& r, const std::vector<char>& is_fixed) {
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      if (is_fixed[static_cast<std::size_t>(it.row())]) it.valueRef() = (it.row() == col) ? 1.0 : 0.0;
    }
  }
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (is_fixed[static_cast<std::size_t>(i)]) r[i] = 0.0;
  }
}

double fluid_content(const Mesh& mesh, const FieldState& s, const MaterialParams& mp) {
  const auto qps = quadrature(kQuadOrder);
  double total = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    for (const auto& q : qps) {
      const CellBasis cb = cell_basis(mesh, static_cast<int>(c), q.point);
      const QpKinematics k = qp_kinematics(cb, mesh.cells[c], s);
      total += theta_from_pressure(k.p, k.F.determinant(), mp) * q.weight * cb.detJ;
    }
  }
  return total;
}

}  // namespace hfgl
