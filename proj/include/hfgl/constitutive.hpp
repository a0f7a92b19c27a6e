#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "hfgl/dual.hpp"

namespace hfgl {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Mat4 = Eigen::Matrix4d;

class SingularDeformation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Material constants in the GPa-m-s system. Permeabilities are SI
/// (m^2/(Pa s)); assembly converts them with kPaPerGPa.
struct MaterialParams {
  double E = 15.96;       // GPa
  double nu = 0.2;
  double M = 12.5;        // GPa
  double B = 0.79;
  double K_intr = 2e-14;  // m^2
  double K_c = 83.3;      // m^3 s / kg
  double zeta = 50.0;
  double eta_F = 1e-3;    // kg/(m s)
  double sigma_c = 0.005; // GPa
  double l = 1.0;         // m
  double n_F0 = 0.2;
  double k_res = 1e-6;  // residual stiffness fraction kept in fully broken material

  // derived
  double mu = 0.0;
  double beta = 0.0;
  double psi_c = 0.0;

  /// Validates the primary constants and fills mu, beta, psi_c.
  void derive();
  double G_c() const { return 8.0 * l * std::sqrt(2.0) * psi_c / 3.0; }
  double darcy_coefficient() const { return K_intr / eta_F; }
};

inline constexpr double kPaPerGPa = 1e9;
inline constexpr double kGradEps = 1e-8;

/// Number of times a phase-field value outside [0,1] was clamped.
std::atomic<long>& clamp_counter();

double degradation(double d);
double degradation_prime(double d);

/// Degradation with the residual stiffness floor used in the stress.
inline double stress_degradation(double d, const MaterialParams& mp) {
  return (1.0 - mp.k_res) * degradation(d) + mp.k_res;
}

/// Plane-strain invariant F:F of diag(F, 1).
inline double full_contraction(const Mat2& F) { return F.squaredNorm() + 1.0; }

double jacobian_checked(const Mat2& F);

double elastic_energy(const Mat2& F, const MaterialParams& mp);

/// W(F, theta, d) = g(d) psi_elas + (M/2)(theta - B(J-1))^2, the potential of first_piola.
double pseudo_energy(const Mat2& F, double theta, double d, const MaterialParams& mp);

/// Total first Piola-Kirchhoff stress P = g(d) P_eff - B p J F^-T.
Mat2 first_piola(const Mat2& F, double p, double d, const MaterialParams& mp);

/// dP_ij/dF_kl, row index 2i+j, column 2k+l.
Mat4 first_piola_tangent(const Mat2& F, double p, double d, const MaterialParams& mp);

/// dP/dp = -B J F^-T.
Mat2 first_piola_dp(const Mat2& F, const MaterialParams& mp);

double fluid_pressure_from_theta(double theta, double J, const MaterialParams& mp);
double theta_from_pressure(double p, double J, const MaterialParams& mp);

double crack_driving_state(const Mat2& F, const MaterialParams& mp);
inline double update_history(double H_old, double D) { return H_old > D ? H_old : D; }

namespace detail {
using std::sqrt;

template <class T>
struct Mat2T {
  T a, b, c, d;  // [[a, b], [c, d]]
};

/// Crack width and the fracture permeability term for a generic scalar.
template <class T>
Mat2T<T> permeability_impl(const Mat2T<T>& F, double d, const Vec2& g, double h_e,
                           const MaterialParams& mp, T* width_out) {
  const T J = F.a * F.d - F.b * F.c;
  if (!(scalar_value(J) > 0.0)) throw SingularDeformation("permeability: J <= 0");
  // C = F^T F
  const T c11 = F.a * F.a + F.c * F.c;
  const T c12 = F.a * F.b + F.c * F.d;
  const T c22 = F.b * F.b + F.d * F.d;
  const T detC = c11 * c22 - c12 * c12;
  const T i11 = c22 / detC;
  const T i12 = -c12 / detC;
  const T i22 = c11 / detC;
  const double kd = mp.darcy_coefficient();
  Mat2T<T> K{kd * J * i11, kd * J * i12, kd * J * i12, kd * J * i22};

  T width = T(0.0);
  const double gn = g.norm();
  const double dc = d < 0.0 ? 0.0 : (d > 1.0 ? 1.0 : d);
  if (gn >= kGradEps && dc > 0.0) {
    const double nx = g.x() / gn;
    const double ny = g.y() / gn;
    const T q = nx * (i11 * nx + i12 * ny) + ny * (i12 * nx + i22 * ny);  // n.C^-1.n
    const T lam = sqrt(T(1.0) / q);
    if (scalar_value(lam) > 1.0) {
      width = (lam - 1.0) * h_e;
      const T v1 = i11 * nx + i12 * ny;
      const T v2 = i12 * nx + i22 * ny;
      const T coef = std::pow(dc, mp.zeta) * mp.K_c * width * width * J;
      K.a = K.a + coef * (i11 - v1 * v1);
      K.b = K.b + coef * (i12 - v1 * v2);
      K.c = K.c + coef * (i12 - v2 * v1);
      K.d = K.d + coef * (i22 - v2 * v2);
    }
  }
  if (width_out) *width_out = width;
  return K;
}
}  // namespace detail

double crack_width(const Vec2& grad_d, const Mat2& C, double h_e);

/// Spatial permeability tensor in m^2/(Pa s).
Mat2 permeability(const Mat2& F, double d, const Vec2& grad_d, double h_e, const MaterialParams& mp);

/// Exact derivatives dK/dF_kl, indexed 2k+l.
std::array<Mat2, 4> permeability_dF(const Mat2& F, double d, const Vec2& grad_d, double h_e,
                                    const MaterialParams& mp);

}  // namespace hfgl
