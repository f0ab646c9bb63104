#pragma once

// Nystrom discretization of the Helmholtz layer operators on a smooth closed
// curve. Kernels with a logarithmic singularity are split as
//   K(t, s) = K1(t, s) ln(4 sin^2((t - s)/2)) + K2(t, s)
// and the log part is integrated with the trigonometric product weights of
// Kress/Martensen, the smooth part with the trapezoid rule. Matrices act on
// plain node samples; the speed |x'(s)| sits inside the kernel.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "shapetaylor/error.hpp"
#include "shapetaylor/geometry.hpp"
#include "shapetaylor/specfun.hpp"

namespace shapetaylor {

using cdouble = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr cdouble kI{0.0, 1.0};
inline constexpr double kEulerGamma = 0.57721566490153286061;

enum class LayerKind { single, double_layer, adjoint_double };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::single: return "single";
    case LayerKind::double_layer: return "double";
    case LayerKind::adjoint_double: return "adjoint_double";
  }
  return "?";
}

/// (i/4) H0(k|x - y|).
inline cdouble greens_function(double k, const Eigen::Vector2d& x, const Eigen::Vector2d& y) {
  const double r = (x - y).norm();
  if (r == 0.0) throw SingularityError("Green's function at coincident points");
  return 0.25 * kI * hankel1(0, k * r);
}

/// An assembled Nystrom matrix together with what it discretizes.
struct BoundaryOperator {
  ComplexMatrix matrix;
  LayerKind kind = LayerKind::single;
  double k = 0.0;
  std::uint64_t curve_id = 0;

  [[nodiscard]] ComplexGrid apply(const ComplexGrid& density) const {
    if (density.size() != matrix.cols()) {
      throw MismatchError("density length does not match operator size");
    }
    return (matrix * density.matrix()).array();
  }
};

/// S, D and K' on one curve, assembled in a single sweep over node pairs.
struct LayerMatrices {
  ComplexMatrix single;
  ComplexMatrix double_layer;
  ComplexMatrix adjoint_double;
  double k = 0.0;
  std::uint64_t curve_id = 0;
};

/// Weights R_j of the log-singular quadrature, indexed by |i - j| mod n.
inline RealGrid kress_weights(Eigen::Index n) {
  spectral::check_size(n);
  const Eigen::Index m = n / 2;
  const double pi = std::numbers::pi;
  RealGrid r(n);
  for (Eigen::Index d = 0; d < n; ++d) {
    double sum = 0.0;
    for (Eigen::Index j = 1; j < m; ++j) {
      sum += std::cos(static_cast<double>(j * d) * pi / m) / static_cast<double>(j);
    }
    r(d) = -2.0 * pi / m * sum - pi / static_cast<double>(m * m) * (d % 2 == 0 ? 1.0 : -1.0);
  }
  return r;
}

namespace detail {

// ln(4 sin^2((t_i - t_j)/2)) for node offset d.
inline RealGrid log_sine(Eigen::Index n) {
  RealGrid out(n);
  out(0) = 0.0;
  for (Eigen::Index d = 1; d < n; ++d) {
    const double s = std::sin(std::numbers::pi * d / n);
    out(d) = std::log(4.0 * s * s);
  }
  return out;
}

inline void check_wavenumber(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw std::invalid_argument("wavenumber must be positive, got " + std::to_string(k));
  }
}

}  // namespace detail

inline LayerMatrices assemble_layers(const BoundaryCurve& curve, double k) {
  detail::check_wavenumber(k);
  const Eigen::Index n = curve.size();
  const double w = curve.step();
  const RealGrid rw = kress_weights(n);
  const RealGrid ls = detail::log_sine(n);
  const Points& x = curve.position();
  const RealGrid& speed = curve.speed();
  const Points& nrm = curve.normal();
  const RealGrid& kappa = curve.curvature();
  const double inv_pi = 1.0 / std::numbers::pi;

  LayerMatrices out;
  out.k = k;
  out.curve_id = curve.id();
  out.single.resize(n, n);
  out.double_layer.resize(n, n);
  out.adjoint_double.resize(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    // Diagonal limits.
    const double sp = speed(i);
    const cdouble s_log = -sp / (4.0 * std::numbers::pi);
    const cdouble s_smooth =
        (0.25 * kI - kEulerGamma / (2.0 * std::numbers::pi) -
         std::log(k * sp / 2.0) / (2.0 * std::numbers::pi)) * sp;
    out.single(i, i) = rw(0) * s_log + w * s_smooth;
    const double dl_diag = -kappa(i) * sp / (4.0 * std::numbers::pi);
    out.double_layer(i, i) = w * dl_diag;
    out.adjoint_double(i, i) = w * dl_diag;

    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::Vector2d d = x.col(i) - x.col(j);
      const double r = d.norm();
      const auto b = cylinder_functions(k * r);
      const cdouble h0 = b.h0(), h1 = b.h1();
      const double lg = ls(j - i);
      const double rwt = rw(j - i);

      // Single layer, symmetric in (i, j) apart from the speed factor.
      const cdouble g_log = -inv_pi / 4.0 * b.j0;
      const cdouble g_full = 0.25 * kI * h0;
      out.single(i, j) = (rwt * g_log + w * (g_full - g_log * lg)) * speed(j);
      out.single(j, i) = (rwt * g_log + w * (g_full - g_log * lg)) * speed(i);

      // dG/dn(y) at y = x_j and dG/dn(x) at x = x_i share H1 and J1.
      const double nj_d = nrm.col(j).dot(d) / r;   // n(s)·(x - y)/r with s = j
      const double ni_d = nrm.col(i).dot(d) / r;   // n(t)·(x - y)/r with t = i
      const cdouble f_full = 0.25 * kI * k * h1;   // (ik/4) H1
      const cdouble f_log = -k * inv_pi / 4.0 * b.j1;  // (i/pi)(ik/4) J1
      // D(i, j): (ik/4) H1 n_j·(x_i - x_j)/r |x'_j|
      out.double_layer(i, j) = (rwt * f_log * nj_d + w * (f_full - f_log * lg) * nj_d) * speed(j);
      // D(j, i): (ik/4) H1 n_i·(x_j - x_i)/r |x'_i|
      out.double_layer(j, i) = -(rwt * f_log * ni_d + w * (f_full - f_log * lg) * ni_d) * speed(i);
      // K'(i, j): -(ik/4) H1 n_i·(x_i - x_j)/r |x'_j|
      out.adjoint_double(i, j) = -(rwt * f_log * ni_d + w * (f_full - f_log * lg) * ni_d) * speed(j);
      // K'(j, i): -(ik/4) H1 n_j·(x_j - x_i)/r |x'_i|
      out.adjoint_double(j, i) = (rwt * f_log * nj_d + w * (f_full - f_log * lg) * nj_d) * speed(i);
    }
  }
  return out;
}

inline BoundaryOperator assemble(LayerKind kind, const BoundaryCurve& curve, double k) {
  auto layers = assemble_layers(curve, k);
  BoundaryOperator op;
  op.kind = kind;
  op.k = k;
  op.curve_id = curve.id();
  switch (kind) {
    case LayerKind::single: op.matrix = std::move(layers.single); break;
    case LayerKind::double_layer: op.matrix = std::move(layers.double_layer); break;
    case LayerKind::adjoint_double: op.matrix = std::move(layers.adjoint_double); break;
  }
  return op;
}

/// Operators with kernels (d_t + d_s) G and (d_t + d_s) dG/dn(s), where d_t
/// and d_s are arc-length derivatives at the two arguments. Both vanish on a
/// circle.
inline BoundaryOperator assemble_moving(LayerKind kind, const BoundaryCurve& curve, double k) {
  detail::check_wavenumber(k);
  if (kind == LayerKind::adjoint_double) {
    throw std::invalid_argument("moving kernels exist for single and double layers only");
  }
  const Eigen::Index n = curve.size();
  const double w = curve.step();
  const RealGrid rw = kress_weights(n);
  const RealGrid ls = detail::log_sine(n);
  const Points& x = curve.position();
  const Points& tau = curve.tangent();
  const Points& nrm = curve.normal();
  const RealGrid& kappa = curve.curvature();
  const RealGrid& dkappa = curve.curvature_derivative();
  const RealGrid& speed = curve.speed();
  const double inv_pi = 1.0 / std::numbers::pi;

  BoundaryOperator op;
  op.kind = kind;
  op.k = k;
  op.curve_id = curve.id();
  op.matrix.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        op.matrix(i, i) = kind == LayerKind::single
                              ? cdouble{0.0}
                              : cdouble{-w * dkappa(i) * speed(i) / (4.0 * std::numbers::pi)};
        continue;
      }
      const Eigen::Index off = i > j ? i - j : j - i;
      const Eigen::Vector2d d = x.col(i) - x.col(j);
      const double r = d.norm();
      const double dr = (tau.col(i) - tau.col(j)).dot(d) / r;
      const auto b = cylinder_functions(k * r);
      cdouble c0{0.0}, c1{0.0};
      if (kind == LayerKind::single) {
        c1 = -0.25 * kI * k * dr;
      } else {
        const double nd = nrm.col(j).dot(d);
        c0 = 0.25 * kI * k * (k / r) * dr * nd;
        c1 = 0.25 * kI * k *
             (-2.0 * dr * nd / (r * r) +
              (kappa(j) * tau.col(j).dot(d) + nrm.col(j).dot(tau.col(i))) / r);
      }
      const cdouble full = c0 * b.h0() + c1 * b.h1();
      const cdouble log_part = kI * inv_pi * (c0 * b.j0 + c1 * b.j1);
      op.matrix(i, j) = (rw(off) * log_part + w * (full - log_part * ls(off))) * speed(j);
    }
  }
  return op;
}

/// Dense LU with partial pivoting, kept for repeated solves.
class FactorizedSystem {
 public:
  FactorizedSystem() = default;

  explicit FactorizedSystem(const ComplexMatrix& a, std::string_view label = "system") {
    if (a.rows() != a.cols()) throw std::invalid_argument("factorize needs a square matrix");
    lu_.compute(a);
    const auto diag = lu_.matrixLU().diagonal().cwiseAbs();
    const double biggest = diag.maxCoeff();
    if (!(biggest > 0.0) || diag.minCoeff() < 1e-14 * biggest) {
      throw SingularMatrixError(std::string(label) + ": pivot below relative tolerance 1e-14");
    }
    rcond_ = lu_.rcond();
    if (rcond_ < 1e-12) {
      warn(std::string(label) + ": condition number estimate " + std::to_string(1.0 / rcond_) +
           " exceeds 1e12, wavenumber may be near a resonance");
    }
  }

  [[nodiscard]] Eigen::Index size() const { return lu_.rows(); }
  [[nodiscard]] double rcond() const { return rcond_; }

  [[nodiscard]] ComplexVector solve(const ComplexVector& rhs) const {
    if (rhs.size() != size()) throw MismatchError("right-hand side length does not match system");
    return lu_.solve(rhs);
  }

  [[nodiscard]] ComplexGrid solve(const ComplexGrid& rhs) const {
    return solve(ComplexVector(rhs.matrix())).array();
  }

 private:
  Eigen::PartialPivLU<ComplexMatrix> lu_;
  double rcond_ = 0.0;
};

inline FactorizedSystem factorize(const ComplexMatrix& a, std::string_view label = "system") {
  return FactorizedSystem(a, label);
}

/// Trapezoid evaluation of the single or double layer potential at points
/// away from the curve.
inline std::vector<cdouble> eval_potential(LayerKind kind, const ComplexGrid& density,
                                           const BoundaryCurve& curve, const Points& points,
                                           double k) {
  detail::check_wavenumber(k);
  curve.check_grid(density.size());
  if (kind == LayerKind::adjoint_double) {
    throw std::invalid_argument("no potential for the adjoint double layer");
  }
  const double spacing = curve.node_spacing();
  const double w = curve.step();
  const Points& x = curve.position();
  const Points& nrm = curve.normal();
  const RealGrid& speed = curve.speed();
  std::vector<cdouble> out(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const Eigen::Vector2d z = points.col(p);
    if (curve.node_distance(z) < spacing) {
      warn("evaluation point (" + std::to_string(z.x()) + ", " + std::to_string(z.y()) +
           ") is within one node spacing of the boundary");
    }
    cdouble acc{0.0};
    for (Eigen::Index j = 0; j < curve.size(); ++j) {
      const Eigen::Vector2d d = z - x.col(j);
      const double r = d.norm();
      if (r == 0.0) throw SingularityError("potential evaluated on a node");
      if (kind == LayerKind::single) {
        acc += hankel1(0, k * r) * density(j) * speed(j);
      } else {
        acc += k * hankel1(1, k * r) * (nrm.col(j).dot(d) / r) * density(j) * speed(j);
      }
    }
    out[static_cast<std::size_t>(p)] = 0.25 * kI * w * acc;
  }
  return out;
}

}  // namespace shapetaylor
