#pragma once

// Incident fields and boundary integral solvers for the sound-soft,
// sound-hard, impedance and transmission problems.
//
// Every solve goes through BoundarySolver, which owns the assembled and
// factorized operators of one (curve, boundary condition, medium, k). The
// same solver handles the forward problem and every shape-derivative order,
// which differ only in their boundary data.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shapetaylor/bie.hpp"
#include "shapetaylor/error.hpp"
#include "shapetaylor/geometry.hpp"
#include "shapetaylor/specfun.hpp"
#include "shapetaylor/traces.hpp"

namespace shapetaylor {

enum class BoundaryCondition { sound_soft, sound_hard, impedance, transmission };

inline const char* to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::sound_soft: return "sound_soft";
    case BoundaryCondition::sound_hard: return "sound_hard";
    case BoundaryCondition::impedance: return "impedance";
    case BoundaryCondition::transmission: return "transmission";
  }
  return "?";
}

/// Material coefficients. `alpha` is the exterior coefficient (alpha_ex for
/// transmission); `alpha_in` is used by transmission only, `lambda` by
/// impedance only.
struct Medium {
  double alpha = 1.0;
  double alpha_in = 1.0;
  double lambda = 0.0;
};

/// Plane wave exp(i k x·z) or point source (i/4) H0(k |x - x_s|). The
/// wavenumber of the field is the exterior one, k / sqrt(alpha_ex).
class IncidentField {
 public:
  enum class Kind { plane, point_source };

  static IncidentField plane(double k, const Eigen::Vector2d& direction) {
    const double norm = direction.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("plane-wave direction must be nonzero");
    IncidentField f(Kind::plane, k);
    f.direction_ = direction / norm;
    return f;
  }

  static IncidentField point_source(double k, const Eigen::Vector2d& source) {
    IncidentField f(Kind::point_source, k);
    f.source_ = source;
    return f;
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double k() const { return k_; }
  [[nodiscard]] const Eigen::Vector2d& direction() const { return direction_; }
  [[nodiscard]] const Eigen::Vector2d& source() const { return source_; }

  /// Field value at x for wavenumber `kw`.
  [[nodiscard]] cdouble value(const Eigen::Vector2d& x, double kw) const {
    if (kind_ == Kind::plane) return std::exp(kI * kw * x.dot(direction_));
    const double r = (x - source_).norm();
    if (r == 0.0) throw SingularityError("incident point source evaluated at the source");
    return 0.25 * kI * hankel1(0, kw * r);
  }

 private:
  IncidentField(Kind kind, double k) : kind_(kind), k_(k) {
    if (!(k > 0.0)) throw std::invalid_argument("wavenumber must be positive");
  }

  Kind kind_;
  double k_;
  Eigen::Vector2d direction_ = Eigen::Vector2d::UnitX();
  Eigen::Vector2d source_ = Eigen::Vector2d::Zero();
};

/// d^m phi / d eta^m, m = 0..max_order, along the straight normal line of
/// each node, evaluated at wavenumber kw.
inline std::vector<ComplexGrid> incident_normal_derivatives(const IncidentField& field,
                                                            const BoundaryCurve& curve,
                                                            int max_order, double kw) {
  if (max_order < 0 || max_order > 3) {
    throw UnsupportedOrderError("incident normal derivatives are provided up to order 3");
  }
  const Eigen::Index n = curve.size();
  std::vector<ComplexGrid> out(static_cast<std::size_t>(max_order) + 1, ComplexGrid(n));
  const Points& x = curve.position();
  const Points& nrm = curve.normal();
  if (field.kind() == IncidentField::Kind::plane) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const cdouble phi = std::exp(kI * kw * x.col(j).dot(field.direction()));
      const cdouble f = kI * kw * nrm.col(j).dot(field.direction());
      cdouble term = phi;
      for (int m = 0; m <= max_order; ++m) {
        out[static_cast<std::size_t>(m)](j) = term;
        term *= f;
      }
    }
    return out;
  }
  if (curve.node_distance(field.source()) < curve.node_spacing()) {
    throw SourceOnBoundaryError("point source lies within one node spacing of the boundary");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Vector2d d = x.col(j) - field.source();
    const double r = d.norm();
    const double p = d.dot(nrm.col(j));
    const double q2 = r * r - p * p;
    const double r1 = p / r, r2 = q2 / (r * r * r), r3 = -3.0 * q2 * p / std::pow(r, 5);
    const double z = kw * r;
    const auto b = cylinder_functions(z);
    const cdouble h0 = b.h0(), h1 = b.h1();
    const cdouble c = 0.25 * kI;
    const cdouble g0 = c * h0;
    const cdouble g1 = c * (-kw * h1);
    const cdouble g2 = c * (-kw * kw * (h0 - h1 / z));
    const cdouble g3 = c * (-kw * kw * kw * (-h1 - h0 / z + 2.0 * h1 / (z * z)));
    const cdouble vals[4] = {g0, g1 * r1, g2 * r1 * r1 + g1 * r2,
                             g3 * r1 * r1 * r1 + 3.0 * g2 * r1 * r2 + g1 * r3};
    for (int m = 0; m <= max_order; ++m) out[static_cast<std::size_t>(m)](j) = vals[m];
  }
  return out;
}

/// Cauchy data of a field on one side of the boundary; `neumann` is du/dn
/// with the outward normal.
struct CauchyData {
  ComplexGrid dirichlet;
  ComplexGrid neumann;
};

/// Prescribed data for one solve. Meaning per boundary condition, for a
/// radiating field w (and, for transmission, an interior field w_in):
///   sound_soft:   w = dirichlet
///   sound_hard:   alpha dw/dn = flux
///   impedance:    alpha dw/dn + i lambda w = flux
///   transmission: w - w_in = dirichlet, alpha_ex dw/dn - alpha_in dw_in/dn = flux
struct BoundaryData {
  ComplexGrid dirichlet;
  ComplexGrid flux;
};

class BoundarySolver;

/// Solution of one boundary value problem: boundary traces and a field
/// evaluator. For the forward problem this is the scattered field (and the
/// interior total field for transmission).
class ScatterSolution {
 public:
  ScatterSolution(std::shared_ptr<const BoundarySolver> solver, CauchyData exterior,
                  CauchyData interior, ComplexGrid density)
      : solver_(std::move(solver)),
        exterior_(std::move(exterior)),
        interior_(std::move(interior)),
        density_(std::move(density)) {}

  [[nodiscard]] const BoundarySolver& solver() const { return *solver_; }
  [[nodiscard]] std::shared_ptr<const BoundarySolver> solver_ptr() const { return solver_; }
  [[nodiscard]] const CauchyData& exterior() const { return exterior_; }
  /// Interior Cauchy data (transmission only; empty otherwise).
  [[nodiscard]] const CauchyData& interior() const { return interior_; }
  [[nodiscard]] const ComplexGrid& dirichlet_trace() const { return exterior_.dirichlet; }
  [[nodiscard]] const ComplexGrid& neumann_trace() const { return exterior_.neumann; }
  /// Representation density (sound-soft: combined layer, sound-hard: single
  /// layer); empty for the Green-representation formulations.
  [[nodiscard]] const ComplexGrid& density() const { return density_; }

  /// Field values. Exterior points give the radiating field; interior
  /// points give the interior field for transmission and throw otherwise.
  [[nodiscard]] std::vector<cdouble> eval(const Points& points) const;

  [[nodiscard]] cdouble eval(const Eigen::Vector2d& point) const {
    return eval(Points(point))[0];
  }

 private:
  std::shared_ptr<const BoundarySolver> solver_;
  CauchyData exterior_;
  CauchyData interior_;
  ComplexGrid density_;
};

class BoundarySolver : public std::enable_shared_from_this<BoundarySolver> {
 public:
  static std::shared_ptr<const BoundarySolver> create(const BoundaryCurve& curve,
                                                      BoundaryCondition bc, const Medium& medium,
                                                      double k) {
    return std::shared_ptr<const BoundarySolver>(new BoundarySolver(curve, bc, medium, k));
  }

  [[nodiscard]] const BoundaryCurve& curve() const { return curve_; }
  [[nodiscard]] BoundaryCondition bc() const { return bc_; }
  [[nodiscard]] const Medium& medium() const { return medium_; }
  [[nodiscard]] double k() const { return k_; }
  [[nodiscard]] double k_exterior() const { return k_ex_; }
  [[nodiscard]] double k_interior() const { return k_in_; }
  [[nodiscard]] const LayerMatrices& exterior_layers() const { return ext_; }
  [[nodiscard]] const LayerMatrices& interior_layers() const { return int_; }
  [[nodiscard]] const FactorizedSystem& system() const { return system_; }

  /// Boundary data of the forward problem for the given incident field.
  [[nodiscard]] BoundaryData forward_data(const IncidentField& field) const {
    const auto phi = incident_normal_derivatives(field, curve_, 1, k_ex_);
    BoundaryData data;
    switch (bc_) {
      case BoundaryCondition::sound_soft:
        data.dirichlet = -phi[0];
        break;
      case BoundaryCondition::sound_hard:
        data.flux = -medium_.alpha * phi[1];
        break;
      case BoundaryCondition::impedance:
        data.flux = -(medium_.alpha * phi[1] + kI * medium_.lambda * phi[0]);
        break;
      case BoundaryCondition::transmission:
        data.dirichlet = -phi[0];
        data.flux = -medium_.alpha * phi[1];
        break;
    }
    return data;
  }

  [[nodiscard]] ScatterSolution solve(const BoundaryData& data) const {
    const Eigen::Index n = curve_.size();
    auto self = shared_from_this();
    switch (bc_) {
      case BoundaryCondition::sound_soft: {
        curve_.check_grid(data.dirichlet.size());
        const ComplexVector f = data.dirichlet.matrix();
        ComplexGrid rho = system_.solve(f).array();
        const ComplexVector rhs = ext_.double_layer * f - 0.5 * f;
        ComplexGrid dn = single_->solve(rhs).array();
        return {self, {data.dirichlet, dn}, {}, rho};
      }
      case BoundaryCondition::sound_hard: {
        curve_.check_grid(data.flux.size());
        const ComplexGrid dn = data.flux / medium_.alpha;
        ComplexGrid rho = system_.solve(ComplexVector(dn.matrix())).array();
        ComplexGrid u = (ext_.single * rho.matrix()).array();
        return {self, {u, dn}, {}, rho};
      }
      case BoundaryCondition::impedance: {
        curve_.check_grid(data.flux.size());
        const ComplexVector rhs = -(ext_.single * data.flux.matrix()) / medium_.alpha;
        ComplexGrid u = system_.solve(rhs).array();
        ComplexGrid dn = (data.flux - kI * medium_.lambda * u) / medium_.alpha;
        return {self, {u, dn}, {}, {}};
      }
      case BoundaryCondition::transmission: {
        curve_.check_grid(data.dirichlet.size());
        curve_.check_grid(data.flux.size());
        ComplexMatrix half_minus_d = -ext_.double_layer;
        half_minus_d.diagonal().array() += 0.5;
        ComplexVector rhs(2 * n);
        rhs.head(n).setZero();
        rhs.tail(n) = -(half_minus_d * data.dirichlet.matrix()) -
                      ext_.single * data.flux.matrix() / medium_.alpha;
        const ComplexVector sol = system_.solve(rhs);
        ComplexGrid a = sol.head(n).array();
        ComplexGrid b = sol.tail(n).array();
        ComplexGrid u = a + data.dirichlet;
        ComplexGrid dn = (medium_.alpha_in * b + data.flux) / medium_.alpha;
        return {self, {u, dn}, {a, b}, {}};
      }
    }
    throw std::logic_error("unknown boundary condition");
  }

  [[nodiscard]] ScatterSolution solve(const IncidentField& field) const {
    return solve(forward_data(field));
  }

  /// Field of a solution at the given points.
  [[nodiscard]] std::vector<cdouble> evaluate(const ScatterSolution& sol, const Points& points) const {
    std::vector<cdouble> out(static_cast<std::size_t>(points.cols()));
    std::vector<Eigen::Index> ext_idx, int_idx;
    for (Eigen::Index p = 0; p < points.cols(); ++p) {
      (curve_.contains(points.col(p)) ? int_idx : ext_idx).push_back(p);
    }
    if (!int_idx.empty() && bc_ != BoundaryCondition::transmission) {
      throw DomainError("evaluation point inside an impenetrable scatterer");
    }
    auto gather = [&](const std::vector<Eigen::Index>& idx) {
      Points sub(2, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = points.col(idx[i]);
      return sub;
    };
    auto scatter_back = [&](const std::vector<Eigen::Index>& idx, const std::vector<cdouble>& v) {
      for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<std::size_t>(idx[i])] = v[i];
    };
    auto combine = [](const std::vector<cdouble>& a, cdouble ca, const std::vector<cdouble>& b, cdouble cb) {
      std::vector<cdouble> r(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) r[i] = ca * a[i] + cb * b[i];
      return r;
    };
    if (!ext_idx.empty()) {
      const Points pts = gather(ext_idx);
      switch (bc_) {
        case BoundaryCondition::sound_soft:
          scatter_back(ext_idx, combine(eval_potential(LayerKind::double_layer, sol.density(), curve_, pts, k_ex_), 1.0,
                                        eval_potential(LayerKind::single, sol.density(), curve_, pts, k_ex_), -kI * k_ex_));
          break;
        case BoundaryCondition::sound_hard:
          scatter_back(ext_idx, eval_potential(LayerKind::single, sol.density(), curve_, pts, k_ex_));
          break;
        case BoundaryCondition::impedance:
        case BoundaryCondition::transmission:
          scatter_back(ext_idx,
                       combine(eval_potential(LayerKind::double_layer, sol.exterior().dirichlet, curve_, pts, k_ex_), 1.0,
                               eval_potential(LayerKind::single, sol.exterior().neumann, curve_, pts, k_ex_), -1.0));
          break;
      }
    }
    if (!int_idx.empty()) {
      const Points pts = gather(int_idx);
      scatter_back(int_idx,
                   combine(eval_potential(LayerKind::single, sol.interior().neumann, curve_, pts, k_in_), 1.0,
                           eval_potential(LayerKind::double_layer, sol.interior().dirichlet, curve_, pts, k_in_), -1.0));
    }
    return out;
  }

 private:
  BoundarySolver(const BoundaryCurve& curve, BoundaryCondition bc, const Medium& medium, double k)
      : curve_(curve), bc_(bc), medium_(medium), k_(k) {
    if (!(medium.alpha > 0.0) || !(medium.alpha_in > 0.0)) {
      throw std::invalid_argument("medium coefficients alpha must be positive");
    }
    if (!std::isfinite(medium.lambda)) throw std::invalid_argument("impedance lambda must be finite");
    k_ex_ = k / std::sqrt(medium.alpha);
    k_in_ = k / std::sqrt(medium.alpha_in);
    ext_ = assemble_layers(curve_, k_ex_);
    const Eigen::Index n = curve_.size();
    switch (bc_) {
      case BoundaryCondition::sound_soft: {
        ComplexMatrix a = ext_.double_layer - kI * k_ex_ * ext_.single;
        a.diagonal().array() += 0.5;
        system_ = FactorizedSystem(a, "combined layer system");
        single_ = std::make_shared<FactorizedSystem>(ext_.single, "single layer (DtN)");
        break;
      }
      case BoundaryCondition::sound_hard: {
        ComplexMatrix a = ext_.adjoint_double;
        a.diagonal().array() -= 0.5;
        system_ = FactorizedSystem(a, "adjoint double layer system");
        break;
      }
      case BoundaryCondition::impedance: {
        ComplexMatrix a = -ext_.double_layer - (kI * medium_.lambda / medium_.alpha) * ext_.single;
        a.diagonal().array() += 0.5;
        system_ = FactorizedSystem(a, "impedance system");
        break;
      }
      case BoundaryCondition::transmission: {
        int_ = assemble_layers(curve_, k_in_);
        const double mu = medium_.alpha_in / medium_.alpha;
        ComplexMatrix a(2 * n, 2 * n);
        a.topLeftCorner(n, n) = int_.double_layer;
        a.topLeftCorner(n, n).diagonal().array() += 0.5;
        a.topRightCorner(n, n) = -int_.single;
        a.bottomLeftCorner(n, n) = -ext_.double_layer;
        a.bottomLeftCorner(n, n).diagonal().array() += 0.5;
        a.bottomRightCorner(n, n) = mu * ext_.single;
        system_ = FactorizedSystem(a, "transmission system");
        break;
      }
    }
  }

  BoundaryCurve curve_;
  BoundaryCondition bc_;
  Medium medium_;
  double k_;
  double k_ex_ = 0.0, k_in_ = 0.0;
  LayerMatrices ext_, int_;
  FactorizedSystem system_;
  std::shared_ptr<FactorizedSystem> single_;
};

inline std::vector<cdouble> ScatterSolution::eval(const Points& points) const {
  return solver_->evaluate(*this, points);
}

/// Boundary condition, incident field and medium of a scattering problem.
struct ScatterProblem {
  BoundaryCondition bc = BoundaryCondition::sound_soft;
  IncidentField incident = IncidentField::plane(1.0, Eigen::Vector2d::UnitX());
  Medium medium;
};

inline ScatterSolution solve(const ScatterProblem& problem, const BoundaryCurve& curve) {
  return BoundarySolver::create(curve, problem.bc, problem.medium, problem.incident.k())
      ->solve(problem.incident);
}

inline ScatterSolution solve_sound_soft(const BoundaryCurve& curve, const IncidentField& field) {
  return solve({BoundaryCondition::sound_soft, field, {}}, curve);
}

inline ScatterSolution solve_sound_hard(const BoundaryCurve& curve, const IncidentField& field,
                                        double alpha = 1.0) {
  return solve({BoundaryCondition::sound_hard, field, {alpha, 1.0, 0.0}}, curve);
}

inline ScatterSolution solve_impedance(const BoundaryCurve& curve, const IncidentField& field,
                                       double lambda, double alpha = 1.0) {
  return solve({BoundaryCondition::impedance, field, {alpha, 1.0, lambda}}, curve);
}

inline ScatterSolution solve_transmission(const BoundaryCurve& curve, const IncidentField& field,
                                          double alpha_in, double alpha_ex) {
  return solve({BoundaryCondition::transmission, field, {alpha_ex, alpha_in, 0.0}}, curve);
}

/// Total field: incident plus scattered outside, the interior field inside.
inline std::vector<cdouble> eval_total(const ScatterSolution& sol, const IncidentField& field,
                                       const Points& points) {
  auto u = sol.eval(points);
  const auto& s = sol.solver();
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    if (!s.curve().contains(points.col(p))) {
      u[static_cast<std::size_t>(p)] += field.value(points.col(p), s.k_exterior());
    }
  }
  return u;
}

}  // namespace shapetaylor
