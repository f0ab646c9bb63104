#pragma once

// Bessel functions J0, J1, Y0, Y1 and Hankel functions H0(1), H1(1) of a
// positive real argument.
//
// Two branches: the ascending power series, summed in extended precision,
// below kSeriesLimit; the Hankel asymptotic expansion above it. At the
// switch both are accurate to roughly 1e-14 relative to the local amplitude
// sqrt(2/(pi x)).

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "shapetaylor/error.hpp"

namespace shapetaylor {

/// J₀, J₁, Y₀, Y₁ at one argument.
struct CylinderValues {
  double j0 = 0.0;
  double j1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;

  [[nodiscard]] std::complex<double> h0() const { return {j0, y0}; }
  [[nodiscard]] std::complex<double> h1() const { return {j1, y1}; }
};

namespace detail {

inline constexpr double kSeriesLimit = 17.0;
inline constexpr long double kEulerGammaL = 0.57721566490153286060651209008240243L;
inline constexpr long double kPiL = 3.14159265358979323846264338327950288L;

// J0, J1 only; valid for every x >= 0 below the switch.
inline void series_j(long double x, long double& j0, long double& j1) {
  const long double q = x * x / 4.0L;
  long double t0 = 1.0L;  // (-q)^m / (m!)^2
  long double t1 = 1.0L;  // (-q)^m / (m! (m+1)!)
  long double s0 = t0, s1 = t1;
  for (int m = 1; m < 200; ++m) {
    t0 *= -q / (static_cast<long double>(m) * m);
    t1 *= -q / (static_cast<long double>(m) * (m + 1));
    s0 += t0;
    s1 += t1;
    if (m > q && std::fabs(t0) < 1e-22L && std::fabs(t1) < 1e-22L) break;
  }
  j0 = s0;
  j1 = s1 * x / 2.0L;
}

inline CylinderValues series_jy(double xd) {
  const long double x = xd;
  const long double q = x * x / 4.0L;
  long double t0 = 1.0L, t1 = 1.0L;
  long double s_j0 = 1.0L, s_j1 = 1.0L;
  long double s_y0 = 0.0L;
  long double s_y1 = 1.0L;  // (H_0 + H_1) * t1 at m = 0
  long double harmonic = 0.0L;
  for (int m = 1; m < 200; ++m) {
    const long double mm = m;
    t0 *= -q / (mm * mm);
    t1 *= -q / (mm * (mm + 1.0L));
    harmonic += 1.0L / mm;
    const long double h_next = harmonic + 1.0L / (mm + 1.0L);
    s_j0 += t0;
    s_j1 += t1;
    s_y0 -= harmonic * t0;  // (-1)^{m+1} H_m q^m/(m!)^2 = -H_m t0
    s_y1 += (harmonic + h_next) * t1;
    if (m > q && std::fabs(t0) * (harmonic + 1.0L) < 1e-22L &&
        std::fabs(t1) * (h_next + 1.0L) < 1e-22L) {
      break;
    }
  }
  const long double half_x = x / 2.0L;
  const long double j0 = s_j0;
  const long double j1 = s_j1 * half_x;
  const long double log_term = std::log(half_x) + kEulerGammaL;
  const long double y0 = (2.0L / kPiL) * (log_term * j0 + s_y0);
  const long double y1 = -2.0L / (kPiL * x) + (2.0L / kPiL) * log_term * j1 -
                         (1.0L / kPiL) * half_x * s_y1;
  return {static_cast<double>(j0), static_cast<double>(j1),
          static_cast<double>(y0), static_cast<double>(y1)};
}

// P and Q of the Hankel expansion for order nu at argument x.
inline void hankel_pq(double nu, double x, double& p, double& q) {
  const double mu = 4.0 * nu * nu;
  p = 1.0;
  q = 0.0;
  double a = 1.0;  // a_k(nu) / x^k with alternating sign folded in below
  double last = 1.0;
  for (int k = 1; k < 80; ++k) {
    const double odd = 2.0 * k - 1.0;
    a *= (mu - odd * odd) / (8.0 * k * x);
    const double mag = std::fabs(a);
    if (mag > last) break;  // asymptotic series started to diverge
    last = mag;
    // k = 1 -> +Q, k = 2 -> -P, k = 3 -> -Q, k = 4 -> +P, ...
    switch (k % 4) {
      case 1: q += a; break;
      case 2: p -= a; break;
      case 3: q -= a; break;
      default: p += a; break;
    }
    if (mag < 1e-17) break;
  }
}

inline CylinderValues asymptotic_jy(double x) {
  double p0, q0, p1, q1;
  hankel_pq(0.0, x, p0, q0);
  hankel_pq(1.0, x, p1, q1);
  const double c = std::cos(x);
  const double s = std::sin(x);
  const double amp = std::sqrt(2.0 / (std::numbers::pi * x));
  const double r2 = std::numbers::sqrt2 / 2.0;
  // chi0 = x - pi/4, chi1 = x - 3pi/4
  const double cos0 = (c + s) * r2, sin0 = (s - c) * r2;
  const double cos1 = (s - c) * r2, sin1 = -(s + c) * r2;
  return {amp * (p0 * cos0 - q0 * sin0), amp * (p1 * cos1 - q1 * sin1),
          amp * (p0 * sin0 + q0 * cos0), amp * (p1 * sin1 + q1 * cos1)};
}

inline void check_order(int order) {
  if (order != 0 && order != 1) {
    throw std::invalid_argument("only orders 0 and 1 are provided, got " +
                                std::to_string(order));
  }
}

}  // namespace detail

/// All four functions at x > 0.
inline CylinderValues cylinder_functions(double x) {
  if (!(x > 0.0)) {
    throw DomainError("Bessel Y and Hankel functions need x > 0, got " + std::to_string(x));
  }
  return x < detail::kSeriesLimit ? detail::series_jy(x) : detail::asymptotic_jy(x);
}

inline double bessel_j(int order, double x) {
  detail::check_order(order);
  if (x < 0.0 || std::isnan(x)) {
    throw DomainError("bessel_j needs x >= 0, got " + std::to_string(x));
  }
  if (x == 0.0) return order == 0 ? 1.0 : 0.0;
  if (x < detail::kSeriesLimit) {
    long double j0, j1;
    detail::series_j(x, j0, j1);
    return static_cast<double>(order == 0 ? j0 : j1);
  }
  const auto v = detail::asymptotic_jy(x);
  return order == 0 ? v.j0 : v.j1;
}

inline double bessel_y(int order, double x) {
  detail::check_order(order);
  const auto v = cylinder_functions(x);
  return order == 0 ? v.y0 : v.y1;
}

/// First-kind Hankel function H⁽¹⁾ of order 0 or 1.
inline std::complex<double> hankel1(int order, double x) {
  detail::check_order(order);
  const auto v = cylinder_functions(x);
  return order == 0 ? v.h0() : v.h1();
}

}  // namespace shapetaylor
