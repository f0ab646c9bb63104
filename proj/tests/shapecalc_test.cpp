#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "oracles/cylinder.hpp"
#include "shapetaylor/shapecalc.hpp"

namespace st = shapetaylor;
using std::numbers::pi;
using cd = std::complex<double>;

namespace {

const Eigen::Vector2d kDir = Eigen::Vector2d(1.0, 1.0).normalized();

// Radial derivatives d^m/dr^m of a disk field g(r), m = 1..3, by
// fourth-order central differences.
std::array<cd, 3> radius_derivatives(const std::function<cd(double)>& g, double r) {
  const double h1 = 1e-3, h3 = 5e-3;
  auto s = [&](double h, int j) { return g(r + j * h); };
  const cd d1 = (s(h1, -2) - 8.0 * s(h1, -1) + 8.0 * s(h1, 1) - s(h1, 2)) / (12 * h1);
  const cd d2 = (-s(h1, -2) + 16.0 * s(h1, -1) - 30.0 * g(r) + 16.0 * s(h1, 1) - s(h1, 2)) / (12 * h1 * h1);
  const cd d3 = (s(h3, -3) / 8.0 - s(h3, -2) + 13.0 / 8 * s(h3, -1) - 13.0 / 8 * s(h3, 1) + s(h3, 2) -
                 s(h3, 3) / 8.0) /
                (h3 * h3 * h3);
  return {d1, d2, d3};
}

st::Points single(double x, double y) {
  st::Points p(2, 1);
  p << x, y;
  return p;
}

struct DiskCase {
  st::BoundaryCondition bc;
  st::Medium medium;
  int order;
};

// Disk scattered field (exterior point) or interior total field from the
// separation-of-variables oracle, for the media used below.
cd disk_value(const DiskCase& c, double k, double r, double x, double y, bool inside) {
  const int mmax = oracle::truncation(k, 3.5);
  const auto f = oracle::plane_wave(k, pi / 4, mmax);
  switch (c.bc) {
    case st::BoundaryCondition::sound_soft: return oracle::soft_disk(f, r).at(x, y);
    case st::BoundaryCondition::sound_hard: return oracle::hard_disk(f, r).at(x, y);
    case st::BoundaryCondition::impedance: return oracle::impedance_disk(f, r, c.medium.lambda).at(x, y);
    case st::BoundaryCondition::transmission: {
      const double kin = k * std::sqrt(c.medium.alpha / c.medium.alpha_in);
      const auto d = oracle::penetrable_disk(f, r, kin, c.medium.alpha_in / c.medium.alpha);
      return inside ? d.interior.at(x, y) : d.scattered.at(x, y);
    }
  }
  return 0.0;
}

}  // namespace

TEST(ShapeCalc, SoftFirstOrderDataAreNormalDerivativeTimesVelocity) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::plane(2.0, kDir);
  const auto sol = st::solve_sound_soft(c, f);
  const st::ShapeCalculus calc(sol, f);
  const auto v = st::VelocityField::sample(c, [](double t) { return std::cos(t) + 0.3; });
  const auto phi = st::incident_normal_derivatives(f, c, 1, 2.0);
  const st::ComplexGrid expected = -v.values() * (sol.neumann_trace() + phi[1]);
  EXPECT_LE((calc.data_1(v).dirichlet - expected).abs().maxCoeff(), 1e-14);
}

// Radial velocity v = 1 on a disk moves the radius, so delta^m u equals
// d^m/dr^m of the disk solution.
TEST(ShapeCalc, DiskRadiusDerivativesMatchSeparationOfVariables) {
  const double k = 2.0, r = 1.5;
  const auto c = st::make_circle(r, 128);
  const auto f = st::IncidentField::plane(k, kDir);
  const std::vector<DiskCase> cases{
      {st::BoundaryCondition::sound_soft, {}, 3},
      {st::BoundaryCondition::sound_hard, {}, 2},
      {st::BoundaryCondition::impedance, {1.0, 1.0, 1.7}, 2},
      {st::BoundaryCondition::transmission, {1.0, 0.5, 0.0}, 2},
  };
  const auto v = st::VelocityField::constant(c, 1.0);
  for (const auto& dc : cases) {
    SCOPED_TRACE(st::to_string(dc.bc));
    const auto sol = st::solve({dc.bc, f, dc.medium}, c);
    const auto stack = st::build_stack(sol, f, v, dc.order);
    std::vector<std::pair<Eigen::Vector2d, bool>> pts{{{3.0, 1.0}, false}, {{-0.5, 2.5}, false}};
    if (dc.bc == st::BoundaryCondition::transmission) pts.push_back({{0.3, -0.2}, true});
    for (const auto& [x, inside] : pts) {
      const auto ref = radius_derivatives(
          [&](double rr) { return disk_value(dc, k, rr, x(0), x(1), inside); }, r);
      for (int m = 1; m <= dc.order; ++m) {
        const cd got = stack.order(m).eval(x);
        const double tol = m == 3 ? 1e-6 : 1e-8;
        EXPECT_LE(std::abs(got - ref[m - 1]), tol * std::max(1.0, std::abs(ref[m - 1])))
            << "order " << m << " at " << x.transpose();
      }
    }
  }
}

// On an ellipse with a non-constant velocity, the Taylor remainder of
// order N must shrink like eps^{N+1}.
TEST(ShapeCalc, TaylorRemainderSlopeOnEllipse) {
  const double k = 2.5;
  const auto c = st::make_ellipse(1.3, 0.9, 128);
  const auto v = st::VelocityField::sample(c, [](double t) { return 0.5 + 0.3 * std::cos(2 * t) + 0.2 * std::sin(t); });
  const auto f = st::IncidentField::plane(k, kDir);
  const std::vector<DiskCase> cases{
      {st::BoundaryCondition::sound_soft, {}, 3},
      {st::BoundaryCondition::sound_hard, {}, 2},
      {st::BoundaryCondition::impedance, {1.0, 1.0, 2.0}, 2},
      {st::BoundaryCondition::transmission, {1.0, 0.6, 0.0}, 2},
  };
  st::Points pts(2, 3);
  pts << 3.0, -2.5, 0.5, 1.0, 2.0, -3.5;
  for (const auto& dc : cases) {
    SCOPED_TRACE(st::to_string(dc.bc));
    const st::ScatterProblem problem{dc.bc, f, dc.medium};
    const auto stack = st::build_stack(st::solve(problem, c), f, v, dc.order);
    for (int n = 0; n <= dc.order; ++n) {
      const double e1 = 2e-2, e2 = 1e-2;
      auto err = [&](double e) {
        const auto pert = st::perturbed_field(problem, c, v, e, pts);
        const auto tay = st::taylor_eval(stack, e, pts, n);
        double s = 0.0;
        for (std::size_t j = 0; j < pert.size(); ++j) s += std::abs(pert[j] - tay[j]);
        return s;
      };
      const double slope = std::log2(err(e1) / err(e2));
      EXPECT_NEAR(slope, n + 1, 0.15) << "order " << n;
    }
  }
}

TEST(ShapeCalc, SecondOrderDataAreSymmetricAndBilinear) {
  const auto c = st::make_ellipse(1.1, 0.7, 64);
  const auto f = st::IncidentField::plane(1.5, kDir);
  const auto v = st::VelocityField::sample(c, [](double t) { return std::cos(t); });
  const auto w = st::VelocityField::sample(c, [](double t) { return 0.4 + std::sin(2 * t); });
  const auto vw = st::VelocityField(c, v.values() + w.values());
  for (auto bc : {st::BoundaryCondition::sound_soft, st::BoundaryCondition::sound_hard,
                  st::BoundaryCondition::impedance, st::BoundaryCondition::transmission}) {
    SCOPED_TRACE(st::to_string(bc));
    const st::ShapeCalculus calc(st::solve({bc, f, {1.0, 0.5, 1.0}}, c), f);
    const auto dv = calc.first(v), dw = calc.first(w), dvw = calc.first(vw);
    const auto a = calc.data_2(v, w, dv, dw);
    const auto b = calc.data_2(w, v, dw, dv);
    const auto s = calc.data_2(vw, vw, dvw, dvw);
    const auto p = calc.data_2(v, v, dv, dv);
    const auto q = calc.data_2(w, w, dw, dw);
    auto cmp = [](const st::ComplexGrid& x, const st::ComplexGrid& y) {
      if (x.size() == 0) return 0.0;
      return (x - y).abs().maxCoeff() / std::max(1.0, y.abs().maxCoeff());
    };
    EXPECT_LE(cmp(a.dirichlet, b.dirichlet), 1e-12);
    EXPECT_LE(cmp(a.flux, b.flux), 1e-12);
    EXPECT_LE(cmp(s.dirichlet, st::ComplexGrid(p.dirichlet + 2.0 * a.dirichlet + q.dirichlet)), 1e-10);
    EXPECT_LE(cmp(s.flux, st::ComplexGrid(p.flux + 2.0 * a.flux + q.flux)), 1e-10);
  }
}

TEST(ShapeCalc, ZeroImpedanceReducesToSoundHard) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::plane(2.0, kDir);
  const auto v = st::VelocityField::sample(c, [](double t) { return std::sin(3 * t) + 0.2; });
  const auto hard = st::build_stack(st::solve_sound_hard(c, f), f, v, 2);
  const auto imp = st::build_stack(st::solve_impedance(c, f, 0.0), f, v, 2);
  for (int m = 0; m <= 2; ++m) {
    const auto& a = hard.order(m).dirichlet_trace();
    const auto& b = imp.order(m).dirichlet_trace();
    EXPECT_LE((a - b).abs().maxCoeff(), 1e-9 * std::max(1.0, a.abs().maxCoeff())) << m;
  }
}

TEST(ShapeCalc, ZeroVelocityGivesZeroDerivatives) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::plane(2.0, kDir);
  const auto stack = st::build_stack(st::solve_sound_soft(c, f), f, st::VelocityField::constant(c, 0.0), 3);
  for (int m = 1; m <= 3; ++m) EXPECT_EQ(stack.order(m).dirichlet_trace().abs().maxCoeff(), 0.0);
}

TEST(ShapeCalc, TaylorAtZeroIsForwardField) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::plane(2.0, kDir);
  const auto sol = st::solve_sound_soft(c, f);
  const auto stack = st::build_stack(sol, f, st::VelocityField::constant(c, 1.0), 3);
  const auto pts = single(3.0, 0.5);
  EXPECT_EQ(st::taylor_eval(stack, 0.0, pts)[0], sol.eval(pts)[0]);
  EXPECT_EQ(st::residual({st::BoundaryCondition::sound_soft, f, {}}, c, stack, 0.0, pts), 0.0);
}

TEST(ShapeCalc, UnsupportedOrdersThrow) {
  const auto c = st::make_circle(1.0, 32);
  const auto f = st::IncidentField::plane(1.0, kDir);
  const auto v = st::VelocityField::constant(c, 1.0);
  EXPECT_THROW(st::build_stack(st::solve_sound_hard(c, f), f, v, 3), st::UnsupportedOrderError);
  EXPECT_THROW(st::build_stack(st::solve_sound_soft(c, f), f, v, 4), st::UnsupportedOrderError);
  const auto stack = st::build_stack(st::solve_sound_soft(c, f), f, v, 1);
  EXPECT_THROW((void)stack.order(2), st::MissingOrderError);
  EXPECT_THROW((void)st::taylor_eval(stack, 0.1, single(2.0, 0.0), 2), st::MissingOrderError);
}

TEST(ShapeCalc, ForeignLowerOrderSolutionRejected) {
  const auto c = st::make_circle(1.0, 32);
  const auto f = st::IncidentField::plane(1.0, kDir);
  const auto v = st::VelocityField::constant(c, 1.0);
  const st::ShapeCalculus a(st::solve_sound_soft(c, f), f);
  const st::ShapeCalculus b(st::solve_sound_soft(c, f), f);
  const auto d = b.first(v);
  EXPECT_THROW((void)a.data_2(v, v, d, d), st::MismatchError);
}

TEST(ShapeCalc, VelocityOnWrongGridRejected) {
  const auto c = st::make_circle(1.0, 32);
  const auto other = st::make_circle(1.0, 64);
  const auto f = st::IncidentField::plane(1.0, kDir);
  const st::ShapeCalculus calc(st::solve_sound_soft(c, f), f);
  EXPECT_THROW((void)calc.data_1(st::VelocityField::constant(other, 1.0)), st::MismatchError);
}

TEST(ShapeCalc, NoContrastTransmissionHasZeroData) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::point_source(2.0, {3.0, 4.0});
  const auto v = st::VelocityField::sample(c, [](double t) { return std::sin(2 * t); });
  const st::ShapeCalculus calc(st::solve_transmission(c, f, 1.0, 1.0), f);
  const auto d1 = calc.first(v);
  const auto a = calc.data_1(v);
  const auto b = calc.data_2(v, v, d1, d1);
  EXPECT_LE(a.dirichlet.abs().maxCoeff(), 1e-10);
  EXPECT_LE(a.flux.abs().maxCoeff(), 1e-10);
  EXPECT_LE(b.dirichlet.abs().maxCoeff(), 1e-10);
  EXPECT_LE(b.flux.abs().maxCoeff(), 1e-10);
}

TEST(ShapeCalc, StackReusesForwardFactorization) {
  const auto c = st::make_ellipse(1.2, 0.8, 64);
  const auto f = st::IncidentField::plane(2.0, kDir);
  for (auto bc : {st::BoundaryCondition::sound_soft, st::BoundaryCondition::sound_hard,
                  st::BoundaryCondition::impedance, st::BoundaryCondition::transmission}) {
    SCOPED_TRACE(st::to_string(bc));
    const auto sol = st::solve({bc, f, {1.0, 0.6, 1.5}}, c);
    const auto v = st::VelocityField::sample(c, [](double t) { return std::cos(3 * t); });
    const auto stack = st::build_stack(sol, f, v, 2);
    for (int m = 1; m <= 2; ++m) EXPECT_EQ(&stack.order(m).solver(), &sol.solver());
    const auto again = sol.solver().solve(sol.solver().forward_data(f));
    EXPECT_LE((again.dirichlet_trace() - sol.dirichlet_trace()).abs().maxCoeff(), 1e-12);
  }
}

// Each order satisfies its own recurrence data on the boundary.
TEST(ShapeCalc, OrderTracesSatisfyTheirData) {
  const auto c = st::make_circle(2.0, 128);
  const auto f = st::IncidentField::plane(3.0, kDir);
  const auto v = st::VelocityField::sample(c, [](double t) { return 0.4 * std::sin(2 * t) * std::cos(3 * t); });
  const st::ShapeCalculus soft(st::solve_sound_soft(c, f), f);
  const auto s1 = soft.first(v);
  EXPECT_LE((s1.dirichlet_trace() - soft.data_1(v).dirichlet).abs().maxCoeff(), 1e-8);
  const st::ShapeCalculus imp(st::solve_impedance(c, f, 2.0), f);
  const auto i1 = imp.first(v);
  const auto i2 = imp.second(v, v, i1, i1);
  const st::ComplexGrid lhs = i2.neumann_trace() + st::kI * 2.0 * i2.dirichlet_trace();
  EXPECT_LE((lhs - imp.data_2(v, v, i1, i1).flux).abs().maxCoeff(), 1e-8);
}

TEST(ShapeCalc, ClosedFormHardRuleKeepsCurvatureTermsAndLosesOneOrder) {
  const double k = 3.0;
  const auto c = st::make_circle(2.0, 128);
  const auto f = st::IncidentField::plane(k, kDir);
  const auto v = st::VelocityField::sample(c, [](double t) { return 0.4 * std::sin(2 * t) * std::cos(3 * t); });
  const st::ScatterProblem problem{st::BoundaryCondition::sound_hard, f, {}};
  const auto sol = st::solve(problem, c);
  const st::ShapeCalculus calc(sol, f, st::SecondOrderRule::closed_form);
  const auto d1 = calc.first(v);
  const auto& U = calc.total_exterior();
  const auto j1 = st::make_jet(d1.dirichlet_trace(), d1.neumann_trace(), c, k, false);
  const st::RealGrid& a = v.values();
  const st::RealGrid& ad = v.derivative();
  const double kappa = 0.5;
  // single-field form written out term by term
  const st::ComplexGrid expected = -2.0 * a * j1.dnn - 2.0 * kappa * a * j1.dn + 2.0 * ad * j1.dt -
                                   a.square() * U.dnnn - 2.0 * kappa * a.square() * U.dnn +
                                   kappa * a * ad * U.dt;
  EXPECT_LE((calc.data_2(v, v, d1, d1).flux - expected).abs().maxCoeff(), 1e-12 * expected.abs().maxCoeff());

  const auto stack = st::build_stack(sol, f, v, 2, st::SecondOrderRule::closed_form);
  st::Points p(2, 1);
  p << 0.0, 4.0;
  auto err = [&](double e) {
    return std::abs(st::perturbed_field(problem, c, v, e, p)[0] - st::taylor_eval(stack, e, p)[0]);
  };
  EXPECT_NEAR(std::log2(err(0.02) / err(0.01)), 2.0, 0.15);
  EXPECT_THROW(st::ShapeCalculus(st::solve_sound_soft(c, f), f, st::SecondOrderRule::closed_form),
               std::invalid_argument);
}
