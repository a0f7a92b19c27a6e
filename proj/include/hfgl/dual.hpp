#pragma once

#include <cmath>

namespace hfgl {

/// Forward-mode dual number carrying one directional derivative.
struct Dual {
  double v = 0.0;
  double dv = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Dual(double value, double deriv) : v(value), dv(deriv) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.dv + b.dv}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.dv - b.dv}; }
inline Dual operator-(Dual a) { return {-a.v, -a.dv}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.dv * b.v + a.v * b.dv}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.dv * b.v - a.v * b.dv) / (b.v * b.v)}; }
inline Dual operator*(double a, Dual b) { return {a * b.v, a * b.dv}; }
inline Dual operator*(Dual a, double b) { return {a.v * b, a.dv * b}; }
inline Dual operator-(Dual a, double b) { return {a.v - b, a.dv}; }
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, 0.5 * a.dv / s};
}

inline double scalar_value(double x) { return x; }
inline double scalar_value(const Dual& x) { return x.v; }

}  // namespace hfgl
