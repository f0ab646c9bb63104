#pragma once

// Normal derivatives of Helmholtz solutions on the boundary expressed through
// tangential derivatives of the Cauchy data, and the Dirichlet/Neumann
// conversion by Green's representation.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapetaylor/bie.hpp"
#include "shapetaylor/error.hpp"
#include "shapetaylor/geometry.hpp"

namespace shapetaylor {

/// Arc-length derivative of sampled boundary data.
inline ComplexGrid tangential_derivative(const ComplexGrid& grid, const BoundaryCurve& curve,
                                         int order = 1) {
  if (order < 1) throw std::invalid_argument("tangential derivative order must be >= 1");
  return curve.tangential_derivative(grid, order);
}

/// d2u/dn2 = -kappa du/dn - d2u/dtau2 - k^2 u.
inline ComplexGrid normal_derivative_2(const ComplexGrid& u, const ComplexGrid& dnu,
                                       const BoundaryCurve& curve, double k) {
  curve.check_grid(u.size());
  curve.check_grid(dnu.size());
  return -curve.curvature() * dnu - curve.tangential_derivative(u, 2) - k * k * u;
}

/// d3u/dn3 = 3 kappa u_tt + kappa_s u_t + k^2 kappa u - (u_n)_tt + (2 kappa^2 - k^2) u_n.
inline ComplexGrid normal_derivative_3(const ComplexGrid& u, const ComplexGrid& dnu,
                                       const BoundaryCurve& curve, double k) {
  curve.check_grid(u.size());
  curve.check_grid(dnu.size());
  const RealGrid& kappa = curve.curvature();
  const ComplexGrid ut = curve.tangential_derivative(u);
  const ComplexGrid utt = curve.tangential_derivative(ut);
  return 3.0 * kappa * utt + curve.curvature_derivative() * ut + k * k * kappa * u -
         curve.tangential_derivative(dnu, 2) + (2.0 * kappa.square() - k * k) * dnu;
}

/// Polynomial in 1/chi, chi = 1 + eta kappa, with constant kappa (circle).
/// terms[p] is the coefficient of chi^{-p}.
class ChiPolynomial {
 public:
  ChiPolynomial() = default;
  ChiPolynomial(double value, int power = 0) {
    terms_.assign(static_cast<std::size_t>(power) + 1, 0.0);
    terms_.back() = value;
  }

  [[nodiscard]] ChiPolynomial d_eta(double kappa) const {
    ChiPolynomial out;
    out.terms_.assign(terms_.size() + 1, 0.0);
    for (std::size_t p = 0; p < terms_.size(); ++p) {
      out.terms_[p + 1] -= static_cast<double>(p) * kappa * terms_[p];
    }
    return out;
  }

  friend ChiPolynomial operator*(const ChiPolynomial& a, const ChiPolynomial& b) {
    ChiPolynomial out;
    if (a.terms_.empty() || b.terms_.empty()) return out;
    out.terms_.assign(a.terms_.size() + b.terms_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.terms_.size(); ++i) {
      for (std::size_t j = 0; j < b.terms_.size(); ++j) out.terms_[i + j] += a.terms_[i] * b.terms_[j];
    }
    return out;
  }

  friend ChiPolynomial operator+(ChiPolynomial a, const ChiPolynomial& b) {
    if (a.terms_.size() < b.terms_.size()) a.terms_.resize(b.terms_.size(), 0.0);
    for (std::size_t i = 0; i < b.terms_.size(); ++i) a.terms_[i] += b.terms_[i];
    return a;
  }

  /// Value on the boundary (chi = 1).
  [[nodiscard]] double at_boundary() const {
    double s = 0.0;
    for (double t : terms_) s += t;
    return s;
  }

 private:
  std::vector<double> terms_;
};

/// d^N u/dn^N = sum_i a_i d^i u/dtau^i + sum_j b_j d^j/dtau^j du/dn on a circle.
struct NormalDerivativeCoefficients {
  int order = 0;
  std::vector<double> a;  // N + 1 entries
  std::vector<double> b;  // N entries
};

/// Coefficients for a circle of the given radius, obtained by differentiating
/// the Helmholtz equation in polar normal coordinates (eta, s), where
///   u_eta_eta = -k^2 u - chi^{-2} u_ss - (kappa / chi) u_eta
/// and d/d_eta commutes with d/ds along the offset circles.
inline NormalDerivativeCoefficients circle_normal_coefficients(int order, double radius, double k) {
  if (order < 2) throw UnsupportedOrderError("circle coefficients start at order 2");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  const double kappa = 1.0 / radius;
  const std::vector<ChiPolynomial> a2{ChiPolynomial(-k * k), ChiPolynomial(0.0),
                                      ChiPolynomial(-1.0, 2)};
  const ChiPolynomial b2_0(-kappa, 1);

  std::vector<ChiPolynomial> a = a2;
  std::vector<ChiPolynomial> b{b2_0, ChiPolynomial(0.0)};
  for (int n = 2; n < order; ++n) {
    std::vector<ChiPolynomial> na(static_cast<std::size_t>(n) + 2);
    std::vector<ChiPolynomial> nb(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n + 1; ++i) {
      ChiPolynomial acc(0.0);
      if (i <= n) acc = acc + a[static_cast<std::size_t>(i)].d_eta(kappa);
      for (int q = 0; q <= 2; ++q) {
        const int j = i - q;
        if (j >= 0 && j < n) acc = acc + b[static_cast<std::size_t>(j)] * a2[static_cast<std::size_t>(q)];
      }
      na[static_cast<std::size_t>(i)] = acc;
    }
    for (int j = 0; j <= n; ++j) {
      ChiPolynomial acc = a[static_cast<std::size_t>(j)];
      if (j < n) {
        acc = acc + b[static_cast<std::size_t>(j)].d_eta(kappa) + b[static_cast<std::size_t>(j)] * b2_0;
      }
      nb[static_cast<std::size_t>(j)] = acc;
    }
    a = std::move(na);
    b = std::move(nb);
  }
  NormalDerivativeCoefficients out;
  out.order = order;
  for (const auto& p : a) out.a.push_back(p.at_boundary());
  for (const auto& p : b) out.b.push_back(p.at_boundary());
  return out;
}

/// d^N u/dn^N on a circle from the Cauchy data and the coefficients above.
inline ComplexGrid circle_normal_derivative(int order, const ComplexGrid& u, const ComplexGrid& dnu,
                                            const BoundaryCurve& circle, double k) {
  circle.check_grid(u.size());
  circle.check_grid(dnu.size());
  const double radius = 1.0 / circle.curvature()(0);
  if ((circle.curvature() - circle.curvature()(0)).abs().maxCoeff() > 1e-9 * circle.curvature()(0)) {
    throw std::invalid_argument("circle_normal_derivative needs a curve of constant curvature");
  }
  const auto c = circle_normal_coefficients(order, radius, k);
  ComplexGrid out = c.a[0] * u + c.b[0] * dnu;
  ComplexGrid du = u, ddn = dnu;
  for (int i = 1; i <= order; ++i) {
    du = circle.tangential_derivative(du);
    out += c.a[static_cast<std::size_t>(i)] * du;
    if (i < order) {
      ddn = circle.tangential_derivative(ddn);
      out += c.b[static_cast<std::size_t>(i)] * ddn;
    }
  }
  return out;
}

/// Neumann trace of a radiating exterior solution from its Dirichlet trace:
/// solves S dnu = (-1/2 + D) u.
inline ComplexGrid dtn(const ComplexGrid& u, const BoundaryCurve& curve, double k) {
  curve.check_grid(u.size());
  const auto layers = assemble_layers(curve, k);
  const FactorizedSystem s(layers.single, "single layer (DtN)");
  const ComplexVector rhs = layers.double_layer * u.matrix() - 0.5 * u.matrix();
  return s.solve(rhs).array();
}

/// Dirichlet trace from the Neumann trace: solves (-1/2 + D) u = S dnu.
inline ComplexGrid ntd(const ComplexGrid& dnu, const BoundaryCurve& curve, double k) {
  curve.check_grid(dnu.size());
  const auto layers = assemble_layers(curve, k);
  ComplexMatrix a = layers.double_layer;
  a.diagonal().array() -= 0.5;
  const FactorizedSystem f(a, "-1/2 + D (NtD)");
  return f.solve(ComplexVector(layers.single * dnu.matrix())).array();
}

/// Moved-derivative layer operators (first order only).
inline BoundaryOperator moving_kernel_operator(int j, LayerKind kind, const BoundaryCurve& curve,
                                               double k) {
  if (j != 1) throw UnsupportedOrderError("moving kernel operators are provided for j = 1 only");
  return assemble_moving(kind, curve, k);
}

/// Residual of S (u_n)_tau + S1 u_n - (-1/2 + D) u_tau - D1 u, the first
/// tangential derivative of Green's identity.
inline ComplexGrid green_identity_residual_1(const ComplexGrid& u, const ComplexGrid& dnu,
                                             const BoundaryCurve& curve, double k) {
  const auto layers = assemble_layers(curve, k);
  const auto s1 = assemble_moving(LayerKind::single, curve, k);
  const auto d1 = assemble_moving(LayerKind::double_layer, curve, k);
  const ComplexVector ut = curve.tangential_derivative(u).matrix();
  const ComplexVector dnut = curve.tangential_derivative(dnu).matrix();
  const ComplexVector lhs = layers.single * dnut + s1.matrix * dnu.matrix();
  const ComplexVector rhs = -0.5 * ut + layers.double_layer * ut + d1.matrix * u.matrix();
  return (lhs - rhs).array();
}

}  // namespace shapetaylor
