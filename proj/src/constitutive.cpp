#include "hfgl/constitutive.hpp"

#include <array>
#include <string>

namespace hfgl {

void MaterialParams::derive() {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("MaterialParams: ") + what);
  };
  require(E > 0.0, "E must be positive");
  require(M > 0.0, "M must be positive");
  require(K_intr > 0.0, "K_intr must be positive");
  require(eta_F > 0.0, "eta_F must be positive");
  require(l > 0.0, "l must be positive");
  require(nu >= 0.0 && nu < 0.5, "nu must lie in [0, 0.5)");
  require(zeta >= 1.0, "zeta must be >= 1");
  require(B > 0.0 && B <= 1.0, "B must lie in (0, 1]");
  require(sigma_c > 0.0, "sigma_c must be positive");
  require(k_res >= 0.0 && k_res < 1.0, "k_res must lie in [0, 1)");
  mu = E / (2.0 * (1.0 + nu));
  beta = 2.0 * nu / (1.0 - 2.0 * nu);
  psi_c = sigma_c * sigma_c / (2.0 * E);
}

std::atomic<long>& clamp_counter() {
  static std::atomic<long> count{0};
  return count;
}

namespace {
double clamp_unit(double d) {
  if (d < 0.0) {
    ++clamp_counter();
    return 0.0;
  }
  if (d > 1.0) {
    ++clamp_counter();
    return 1.0;
  }
  return d;
}
}  // namespace

double degradation(double d) {
  const double c = clamp_unit(d);
  return (1.0 - c) * (1.0 - c);
}

double degradation_prime(double d) { return -2.0 * (1.0 - clamp_unit(d)); }

double jacobian_checked(const Mat2& F) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw SingularDeformation("non-positive Jacobian J = " + std::to_string(J));
  return J;
}

double elastic_energy(const Mat2& F, const MaterialParams& mp) {
  const double J = jacobian_checked(F);
  if (mp.beta == 0.0) return 0.5 * mp.mu * (full_contraction(F) - 3.0 - 2.0 * std::log(J));
  return 0.5 * mp.mu * ((full_contraction(F) - 3.0) + (2.0 / mp.beta) * (std::pow(J, -mp.beta) - 1.0));
}

double pseudo_energy(const Mat2& F, double theta, double d, const MaterialParams& mp) {
  const double J = jacobian_checked(F);
  const double s = theta - mp.B * (J - 1.0);
  return stress_degradation(d, mp) * elastic_energy(F, mp) + 0.5 * mp.M * s * s;
}

Mat2 first_piola(const Mat2& F, double p, double d, const MaterialParams& mp) {
  const double J = jacobian_checked(F);
  const Mat2 Fit = F.inverse().transpose();
  const double g = stress_degradation(d, mp);
  return g * mp.mu * (F - std::pow(J, -mp.beta) * Fit) - mp.B * p * J * Fit;
}

Mat4 first_piola_tangent(const Mat2& F, double p, double d, const MaterialParams& mp) {
  const double J = jacobian_checked(F);
  const Mat2 Fi = F.inverse();
  const Mat2 Fit = Fi.transpose();
  const double g = stress_degradation(d, mp);
  const double Jb = std::pow(J, -mp.beta);
  Mat4 A;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
          const double dik_djl = (i == k && j == l) ? 1.0 : 0.0;
          const double eff = dik_djl + mp.beta * Jb * Fit(i, j) * Fit(k, l) + Jb * Fi(j, k) * Fi(l, i);
          const double pres = J * Fit(k, l) * Fit(i, j) - J * Fi(j, k) * Fi(l, i);
          A(2 * i + j, 2 * k + l) = g * mp.mu * eff - mp.B * p * pres;
        }
      }
    }
  }
  return A;
}

Mat2 first_piola_dp(const Mat2& F, const MaterialParams& mp) {
  const double J = jacobian_checked(F);
  return -mp.B * J * F.inverse().transpose();
}

double fluid_pressure_from_theta(double theta, double J, const MaterialParams& mp) {
  return theta * mp.M - mp.M * mp.B * (J - 1.0);
}

double theta_from_pressure(double p, double J, const MaterialParams& mp) {
  return p / mp.M + mp.B * (J - 1.0);
}

double crack_driving_state(const Mat2& F, const MaterialParams& mp) {
  const double D = elastic_energy(F, mp) - mp.psi_c;
  return D > 0.0 ? D : 0.0;
}

double crack_width(const Vec2& grad_d, const Mat2& C, double h_e) {
  const double gg = grad_d.squaredNorm();
  if (std::sqrt(gg) < kGradEps) return 0.0;
  const double q = grad_d.dot(C.inverse() * grad_d);
  const double lam = std::sqrt(gg / q);
  return lam > 1.0 ? (lam - 1.0) * h_e : 0.0;
}

Mat2 permeability(const Mat2& F, double d, const Vec2& grad_d, double h_e, const MaterialParams& mp) {
  const detail::Mat2T<double> f{F(0, 0), F(0, 1), F(1, 0), F(1, 1)};
  const auto K = detail::permeability_impl<double>(f, d, grad_d, h_e, mp, nullptr);
  Mat2 out;
  out << K.a, K.b, K.c, K.d;
  return out;
}

std::array<Mat2, 4> permeability_dF(const Mat2& F, double d, const Vec2& grad_d, double h_e,
                                    const MaterialParams& mp) {
  std::array<Mat2, 4> out;
  for (int kl = 0; kl < 4; ++kl) {
    detail::Mat2T<Dual> f{Dual(F(0, 0), kl == 0), Dual(F(0, 1), kl == 1), Dual(F(1, 0), kl == 2),
                          Dual(F(1, 1), kl == 3)};
    const auto K = detail::permeability_impl<Dual>(f, d, grad_d, h_e, mp, nullptr);
    out[static_cast<std::size_t>(kl)] << K.a.dv, K.b.dv, K.c.dv, K.d.dv;
  }
  return out;
}

}  // namespace hfgl
