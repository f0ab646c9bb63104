#pragma once

// Closed parametrized curves sampled on equispaced parameter nodes, normal
// velocity fields, normal-offset perturbations and the shape derivatives of
// the tangent/normal frame.

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapetaylor/error.hpp"
#include "shapetaylor/spectral.hpp"

namespace shapetaylor {

namespace detail {

inline std::uint64_t next_curve_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline RealGrid cross(const Points& a, const Points& b) {
  return a.row(0).array() * b.row(1).array() - a.row(1).array() * b.row(0).array();
}

inline RealGrid dot(const Points& a, const Points& b) {
  return (a.array() * b.array()).colwise().sum().transpose();
}

inline Points spectral_rows(const Points& p, int order) {
  Points out(2, p.cols());
  out.row(0) = spectral::derivative(p.row(0).transpose().array(), order).transpose();
  out.row(1) = spectral::derivative(p.row(1).transpose().array(), order).transpose();
  return out;
}

}  // namespace detail

/// Closed curve x(t), t in [0, 2pi), sampled at t_j = 2 pi j / n. Stores the
/// first three parameter derivatives and the arc-length geometry derived
/// from them. Orientation is counterclockwise, with n = [tau_2, -tau_1]
/// pointing outward.
class BoundaryCurve {
 public:
  BoundaryCurve(Points x, Points dx, Points ddx, Points dddx)
      : id_(detail::next_curve_id()),
        x_(std::move(x)),
        dx_(std::move(dx)),
        ddx_(std::move(ddx)),
        dddx_(std::move(dddx)) {
    spectral::check_size(x_.cols());
    const auto n = x_.cols();
    if (dx_.cols() != n || ddx_.cols() != n || dddx_.cols() != n) {
      throw std::invalid_argument("curve derivative samples differ in length");
    }
    speed_ = dx_.colwise().norm().transpose().array();
    if ((speed_ <= 0.0).any()) throw std::invalid_argument("curve has a stationary point");
    tangent_ = dx_.array().rowwise() / speed_.transpose();
    normal_.resize(2, n);
    normal_.row(0) = tangent_.row(1);
    normal_.row(1) = -tangent_.row(0);
    const RealGrid c12 = detail::cross(dx_, ddx_);
    const RealGrid c13 = detail::cross(dx_, dddx_);
    const RealGrid d12 = detail::dot(dx_, ddx_);
    const RealGrid s3 = speed_.cube();
    curvature_ = c12 / s3;
    curvature_derivative_ = (c13 / s3 - 3.0 * c12 * d12 / (s3 * speed_.square())) / speed_;
  }

  /// Geometry from position samples alone, by spectral differentiation.
  static BoundaryCurve from_positions(const Points& x) {
    return {x, detail::spectral_rows(x, 1), detail::spectral_rows(x, 2),
            detail::spectral_rows(x, 3)};
  }

  [[nodiscard]] std::uint64_t id() const { return id_; }
  [[nodiscard]] Eigen::Index size() const { return x_.cols(); }
  [[nodiscard]] static constexpr double period() { return 2.0 * std::numbers::pi; }
  [[nodiscard]] double step() const { return period() / static_cast<double>(size()); }
  [[nodiscard]] RealGrid nodes() const { return spectral::nodes(size()); }

  [[nodiscard]] const Points& position() const { return x_; }
  [[nodiscard]] const Points& d1() const { return dx_; }
  [[nodiscard]] const Points& d2() const { return ddx_; }
  [[nodiscard]] const Points& d3() const { return dddx_; }
  /// |x'(t)|, arc length per unit parameter.
  [[nodiscard]] const RealGrid& speed() const { return speed_; }
  [[nodiscard]] const Points& tangent() const { return tangent_; }
  [[nodiscard]] const Points& normal() const { return normal_; }
  [[nodiscard]] const RealGrid& curvature() const { return curvature_; }
  /// Arc-length derivative of the curvature.
  [[nodiscard]] const RealGrid& curvature_derivative() const { return curvature_derivative_; }

  /// Largest distance between neighbouring nodes.
  [[nodiscard]] double node_spacing() const {
    double h = 0.0;
    for (Eigen::Index j = 0; j < size(); ++j) {
      h = std::max(h, (x_.col((j + 1) % size()) - x_.col(j)).norm());
    }
    return h;
  }

  [[nodiscard]] double length() const { return speed_.sum() * step(); }
  [[nodiscard]] double total_curvature() const { return (curvature_ * speed_).sum() * step(); }

  /// Enclosed area, trapezoid rule on (x dy - y dx)/2.
  [[nodiscard]] double area() const { return 0.5 * detail::cross(x_, dx_).sum() * step(); }

  /// Arc-length derivative of sampled data.
  template <typename Derived>
  [[nodiscard]] Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> tangential_derivative(
      const Eigen::ArrayBase<Derived>& f, int order = 1) const {
    check_grid(f.size());
    Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> out = f;
    for (int o = 0; o < order; ++o) out = spectral::derivative(out) / speed_;
    return out;
  }

  /// Winding number of the node polygon around p.
  [[nodiscard]] int winding_number(const Eigen::Vector2d& p) const {
    double total = 0.0;
    for (Eigen::Index j = 0; j < size(); ++j) {
      const Eigen::Vector2d a = x_.col(j) - p;
      const Eigen::Vector2d b = x_.col((j + 1) % size()) - p;
      total += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
  }

  [[nodiscard]] bool contains(const Eigen::Vector2d& p) const { return winding_number(p) != 0; }

  /// Distance from p to the nearest node (an upper bound on the distance
  /// to the curve, within half a node spacing).
  [[nodiscard]] double node_distance(const Eigen::Vector2d& p) const {
    return (x_.colwise() - p).colwise().norm().minCoeff();
  }

  void check_grid(Eigen::Index n) const {
    if (n != size()) {
      throw MismatchError("grid of length " + std::to_string(n) + " on a curve with " +
                          std::to_string(size()) + " nodes");
    }
  }

 private:
  std::uint64_t id_;
  Points x_, dx_, ddx_, dddx_;
  RealGrid speed_;
  Points tangent_, normal_;
  RealGrid curvature_, curvature_derivative_;
};

/// x(t) = [a cos t, b sin t].
inline BoundaryCurve make_ellipse(double a, double b, Eigen::Index n_nodes) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("ellipse semi-axes must be positive");
  }
  if (n_nodes < 8) throw std::invalid_argument("need at least 8 nodes");
  const RealGrid t = spectral::nodes(n_nodes);
  const RealGrid c = t.cos(), s = t.sin();
  Points x(2, n_nodes), dx(2, n_nodes), ddx(2, n_nodes), dddx(2, n_nodes);
  x.row(0) = a * c;
  x.row(1) = b * s;
  dx.row(0) = -a * s;
  dx.row(1) = b * c;
  ddx.row(0) = -a * c;
  ddx.row(1) = -b * s;
  dddx.row(0) = a * s;
  dddx.row(1) = -b * c;
  return {x, dx, ddx, dddx};
}

inline BoundaryCurve make_circle(double radius, Eigen::Index n_nodes) {
  if (!(radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
  return make_ellipse(radius, radius, n_nodes);
}

/// Normal velocity amplitude v on the nodes of a curve, with its arc-length
/// derivative.
class VelocityField {
 public:
  VelocityField(const BoundaryCurve& curve, RealGrid v)
      : v_(std::move(v)) {
    curve.check_grid(v_.size());
    vdot_ = curve.tangential_derivative(v_);
  }

  /// Samples f(t_j) in the curve's own parameter.
  template <typename F>
  static VelocityField sample(const BoundaryCurve& curve, F&& f) {
    const RealGrid t = curve.nodes();
    RealGrid v(t.size());
    for (Eigen::Index j = 0; j < t.size(); ++j) v(j) = f(t(j));
    return {curve, std::move(v)};
  }

  static VelocityField constant(const BoundaryCurve& curve, double value) {
    return {curve, RealGrid::Constant(curve.size(), value)};
  }

  [[nodiscard]] const RealGrid& values() const { return v_; }
  [[nodiscard]] const RealGrid& derivative() const { return vdot_; }
  [[nodiscard]] Eigen::Index size() const { return v_.size(); }

 private:
  RealGrid v_, vdot_;
};

/// Curve x + sum_i eps_i v_i n, geometry recomputed from the new positions.
inline BoundaryCurve perturb(const BoundaryCurve& curve, std::span<const VelocityField> fields,
                             std::span<const double> eps) {
  if (fields.size() != eps.size() || fields.empty()) {
    throw std::invalid_argument("perturb needs one amplitude per velocity field");
  }
  RealGrid offset = RealGrid::Zero(curve.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    curve.check_grid(fields[i].size());
    offset += eps[i] * fields[i].values();
  }
  const RealGrid jacobian = 1.0 + offset * curve.curvature();
  if (jacobian.minCoeff() <= 0.0) {
    throw SelfIntersectionError("normal offset folds the curve: min(1 + eps v kappa) = " +
                                std::to_string(jacobian.minCoeff()));
  }
  Points x = curve.position();
  x.array() += curve.normal().array().rowwise() * offset.transpose();
  return BoundaryCurve::from_positions(x);
}

inline BoundaryCurve perturb(const BoundaryCurve& curve, const VelocityField& v, double eps) {
  return perturb(curve, std::span<const VelocityField>(&v, 1), std::span<const double>(&eps, 1));
}

namespace detail {

inline Points combine(const RealGrid& a, const Points& p, const RealGrid& b, const Points& q) {
  Points out = p.array().rowwise() * a.transpose();
  out.array() += q.array().rowwise() * b.transpose();
  return out;
}

}  // namespace detail

/// delta_v tau = vdot n.
inline Points shape_derivative_tangent_1(const BoundaryCurve& curve, const VelocityField& v) {
  return curve.normal().array().rowwise() * v.derivative().transpose();
}

/// delta_v n = -vdot tau.
inline Points shape_derivative_normal_1(const BoundaryCurve& curve, const VelocityField& v) {
  return curve.tangent().array().rowwise() * (-v.derivative()).transpose();
}

/// delta_[v,w] tau = -vdot wdot tau - (v wdot + w vdot) kappa n.
inline Points shape_derivative_tangent_2(const BoundaryCurve& curve, const VelocityField& v,
                                         const VelocityField& w) {
  const RealGrid& vd = v.derivative();
  const RealGrid& wd = w.derivative();
  const RealGrid mixed = (v.values() * wd + w.values() * vd) * curve.curvature();
  return detail::combine(-vd * wd, curve.tangent(), -mixed, curve.normal());
}

/// delta_[v,w] n = -vdot wdot n + (v wdot + w vdot) kappa tau.
inline Points shape_derivative_normal_2(const BoundaryCurve& curve, const VelocityField& v,
                                        const VelocityField& w) {
  const RealGrid& vd = v.derivative();
  const RealGrid& wd = w.derivative();
  const RealGrid mixed = (v.values() * wd + w.values() * vd) * curve.curvature();
  return detail::combine(-vd * wd, curve.normal(), mixed, curve.tangent());
}

}  // namespace shapetaylor
