#pragma once

// Trigonometric interpolation on n equispaced nodes of a 2pi-periodic
// parameter: node set and differentiation of sampled functions.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace shapetaylor {

using RealGrid = Eigen::ArrayXd;
using ComplexGrid = Eigen::ArrayXcd;
using Points = Eigen::Matrix2Xd;

namespace spectral {

inline void check_size(Eigen::Index n) {
  if (n < 4 || n % 2 != 0) {
    throw std::invalid_argument("node count must be even and >= 4, got " + std::to_string(n));
  }
}

/// t_j = 2 pi j / n.
inline RealGrid nodes(Eigen::Index n) {
  check_size(n);
  return RealGrid::LinSpaced(n, 0.0, 2.0 * std::numbers::pi * (n - 1) / n);
}

/// First column of the circulant differentiation matrix.
inline RealGrid stencil(Eigen::Index n) {
  check_size(n);
  RealGrid c(n);
  c(0) = 0.0;
  const double h = 2.0 * std::numbers::pi / n;
  for (Eigen::Index d = 1; d < n; ++d) {
    c(d) = 0.5 * (d % 2 == 0 ? 1.0 : -1.0) / std::tan(d * h / 2.0);
  }
  return c;
}

/// Parameter derivative of the interpolant; the Nyquist mode is dropped.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> derivative(
    const Eigen::ArrayBase<Derived>& f, int order = 1) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = f.size();
  const RealGrid c = stencil(n);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> cur = f;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> next(n);
  for (int o = 0; o < order; ++o) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // Rows of the stencil sum to zero; subtracting f_j keeps constants exact.
      Scalar acc{0};
      for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index d = j >= k ? j - k : j - k + n;
        acc += c(d) * (cur(k) - cur(j));
      }
      next(j) = acc;
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace spectral
}  // namespace shapetaylor
