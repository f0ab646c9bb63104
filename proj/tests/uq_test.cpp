#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "shapetaylor/uq.hpp"

namespace st = shapetaylor;
using std::numbers::pi;
using cd = std::complex<double>;

namespace {

struct Fixture {
  st::BoundaryCurve curve = st::make_circle(1.0, 64);
  st::IncidentField incident = st::IncidentField::plane(2.0, {1.0, 0.0});
  st::ScatterProblem problem{st::BoundaryCondition::impedance, incident, {1.0, 1.0, 3.0}};
  st::Points points;
  Fixture() {
    points.resize(2, 3);
    points << 2.0, -1.5, 0.3, 0.5, 1.0, -2.2;
  }
};

// E[f(omega)] for omega ~ U[-1, 1], f sampled by a 32-node Gauss-Legendre rule.
template <typename F>
std::vector<cd> legendre_mean(F&& f, std::size_t points) {
  using rule = boost::math::quadrature::gauss<double, 32>;
  std::vector<cd> acc(points, 0.0);
  auto add = [&](double x, double w) {
    const auto v = f(x);
    for (std::size_t p = 0; p < points; ++p) acc[p] += 0.5 * w * v[p];
  };
  const auto& x = rule::abscissa();
  const auto& w = rule::weights();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      add(0.0, w[i]);
    } else {
      add(x[i], w[i]);
      add(-x[i], w[i]);
    }
  }
  return acc;
}

double sum_abs_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace

TEST(Uq, FourierBasis) {
  const auto c = st::make_circle(2.5, 32);
  const auto b = st::fourier_basis(c, 11);
  ASSERT_EQ(b.size(), 11u);
  const auto t = c.nodes();
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    EXPECT_EQ(b[0].values()(j), 1.0);
    EXPECT_DOUBLE_EQ(b[1].values()(j), std::cos(t(j)));
    EXPECT_DOUBLE_EQ(b[5].values()(j), std::cos(5 * t(j)));
    EXPECT_DOUBLE_EQ(b[6].values()(j), std::sin(t(j)));
    EXPECT_DOUBLE_EQ(b[10].values()(j), std::sin(5 * t(j)));
  }
  EXPECT_THROW(st::fourier_basis(c, 4), std::invalid_argument);
}

TEST(Uq, EstimatorsAtZeroEpsAndDegeneracies) {
  Fixture s;
  const st::ShapeCalculus calc(st::solve(s.problem, s.curve), s.incident);
  const auto basis = st::fourier_basis(s.curve, 3);
  const auto d = st::expansion_values(calc, basis, s.points);
  for (int n : {1, 2, 4, 7}) {
    for (int N = 0; N <= 2; ++N) {
      const auto e = st::estimator(d, n, N, 0.0);
      for (std::size_t p = 0; p < d.u.size(); ++p) EXPECT_EQ(e.values[p], st::detail::ipow(d.u[p], n));
    }
  }
  const auto e0 = st::estimator(d, 1, 0, 0.03), e1 = st::estimator(d, 1, 1, 0.03);
  EXPECT_EQ(e0.values, e1.values);
  EXPECT_EQ(e0.values, d.u);
  for (const auto& v : st::variance_estimator(d, 0.0).values) EXPECT_EQ(v, cd(0.0));
}

TEST(Uq, EstimatorNestingIdentity) {
  Fixture s;
  const st::ShapeCalculus calc(st::solve(s.problem, s.curve), s.incident);
  const auto basis = st::fourier_basis(s.curve, 5);
  const auto d = st::expansion_values(calc, basis, s.points);
  const double eps = 0.03;
  for (int n : {1, 2, 4, 7}) {
    const auto e1 = st::estimator(d, n, 1, eps), e2 = st::estimator(d, n, 2, eps);
    for (std::size_t p = 0; p < d.u.size(); ++p) {
      cd s2 = 0.0;
      for (const auto& f : d.second) s2 += f[p];
      const cd expected = eps * eps / 3.0 * n * std::pow(d.u[p], n - 1) * 0.5 * s2;
      EXPECT_LE(std::abs(e2.values[p] - e1.values[p] - expected), 1e-13 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST(Uq, SingleFieldVariance) {
  Fixture s;
  const st::ShapeCalculus calc(st::solve(s.problem, s.curve), s.incident);
  const auto v = st::VelocityField::sample(s.curve, [](double t) { return std::cos(2 * t); });
  const auto d = st::expansion_values(calc, std::span(&v, 1), s.points, 1);
  const auto var = st::variance_estimator(d, 0.02);
  for (std::size_t p = 0; p < d.u.size(); ++p) {
    EXPECT_EQ(var.values[p], 0.02 * 0.02 / 3.0 * (d.first[0][p] * d.first[0][p]));
  }
  EXPECT_THROW(st::estimator(d, 2, 2, 0.02), st::MissingOrderError);
}

// One random coefficient: exact moments by Gauss-Legendre quadrature in
// omega, each node a forward solve on the perturbed curve.
TEST(Uq, SingleFieldMomentsAgainstQuadrature) {
  Fixture s;
  const auto sol = st::solve(s.problem, s.curve);
  const st::ShapeCalculus calc(sol, s.incident);
  const auto v = st::VelocityField::sample(s.curve, [](double t) { return 0.6 + 0.4 * std::cos(t); });
  const auto d = st::expansion_values(calc, std::span(&v, 1), s.points);
  std::vector<double> r2, r1, r1mean;
  std::vector<double> odd_central;
  const std::vector<double> grid{0.01, 0.02, 0.04};
  for (double eps : grid) {
    const auto m1 = legendre_mean([&](double w) { return st::perturbed_field(s.problem, s.curve, v, eps * w, s.points); },
                                  s.points.cols());
    const auto m2 = legendre_mean(
        [&](double w) {
          auto u = st::perturbed_field(s.problem, s.curve, v, eps * w, s.points);
          for (auto& x : u) x *= x;
          return u;
        },
        s.points.cols());
    const auto m3c = legendre_mean(
        [&](double w) {
          auto u = st::perturbed_field(s.problem, s.curve, v, eps * w, s.points);
          for (std::size_t p = 0; p < u.size(); ++p) u[p] = std::pow(u[p] - m1[p], 3);
          return u;
        },
        s.points.cols());
    r2.push_back(sum_abs_diff(m2, st::estimator(d, 2, 2, eps).values) / std::pow(eps, 4));
    r1.push_back(sum_abs_diff(m2, st::estimator(d, 2, 1, eps).values) / std::pow(eps, 2));
    r1mean.push_back(sum_abs_diff(m1, st::estimator(d, 1, 2, eps).values) / std::pow(eps, 4));
    double s3 = 0.0;
    for (const auto& x : m3c) s3 += std::abs(x);
    odd_central.push_back(s3);
  }
  for (const auto* r : {&r2, &r1mean}) {
    const double hi = *std::max_element(r->begin(), r->end()), lo = *std::min_element(r->begin(), r->end());
    EXPECT_LT(hi / lo, 2.0);
  }
  // first-order estimator misses the eps^2 mean shift of u^2
  EXPECT_GT(r1.front(), 0.0);
  EXPECT_LT(r2.back() * std::pow(0.04, 4), r1.back() * std::pow(0.04, 2));
  // third central moment is O(eps^4)
  EXPECT_NEAR(std::log2(odd_central[2] / odd_central[1]), 4.0, 0.3);
}

TEST(Uq, SampleOmegaIsUniformAndReproducible) {
  const std::size_t count = 20000;
  double mean = 0.0, second = 0.0, odd = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto w = st::sample_omega(7, i, 3);
    for (double x : w) {
      EXPECT_GE(x, -1.0);
      EXPECT_LT(x, 1.0);
    }
    mean += w[0];
    second += w[1] * w[1];
    odd += w[0] * w[1] * w[2];
  }
  mean /= count;
  second /= count;
  odd /= count;
  // standard deviations of the single-sample quantities: 1/sqrt(3), sqrt(4/45), 1/sqrt(27)
  EXPECT_LE(std::abs(mean), 3.0 / std::sqrt(3.0 * count));
  EXPECT_LE(std::abs(second - 1.0 / 3.0), 3.0 * std::sqrt(4.0 / 45.0 / count));
  EXPECT_LE(std::abs(odd), 3.0 / std::sqrt(27.0 * count));
  EXPECT_EQ(st::sample_omega(7, 123, 3), st::sample_omega(7, 123, 3));
  EXPECT_NE(st::sample_omega(7, 123, 3), st::sample_omega(8, 123, 3));
}

TEST(Uq, MonteCarloDeterministicAcrossThreadCounts) {
  Fixture s;
  const st::RandomPerturbation pert{st::fourier_basis(s.curve, 3), 0.05};
  st::MonteCarloOptions a;
  a.samples = 24;
  a.seed = 99;
  st::MonteCarloOptions b = a;
  b.threads = 3;
  const auto x = st::monte_carlo_samples(s.problem, s.curve, pert, s.points, a);
  const auto y = st::monte_carlo_samples(s.problem, s.curve, pert, s.points, b);
  EXPECT_EQ(x.values, y.values);
  EXPECT_EQ(st::monte_carlo_moment(x, 2, false).values, st::monte_carlo_moment(y, 2, false).values);
}

TEST(Uq, MonteCarloAtZeroEpsIsForwardPower) {
  Fixture s;
  const auto u = st::solve(s.problem, s.curve).eval(s.points);
  const st::RandomPerturbation pert{st::fourier_basis(s.curve, 3), 0.0};
  st::MonteCarloOptions o;
  o.samples = 7;
  for (int n : {1, 2, 7}) {
    const auto m = st::monte_carlo_moment(s.problem, s.curve, pert, n, false, o, s.points);
    for (std::size_t p = 0; p < u.size(); ++p) EXPECT_EQ(m.values[p], st::detail::ipow(u[p], n));
  }
}

TEST(Uq, MonteCarloMeanConsistentWithSecondOrderEstimator) {
  Fixture s;
  const auto v = st::VelocityField::sample(s.curve, [](double t) { return 0.6 + 0.4 * std::cos(t); });
  const double eps = 0.02;
  const st::RandomPerturbation pert{{v}, eps};
  st::MonteCarloOptions o;
  o.samples = 400;
  o.seed = 5;
  const auto smp = st::monte_carlo_samples(s.problem, s.curve, pert, s.points, o);
  const auto mean = st::monte_carlo_moment(smp, 1, false);
  const auto var = st::monte_carlo_moment(smp, 2, true);
  const st::ShapeCalculus calc(st::solve(s.problem, s.curve), s.incident);
  const auto d = st::expansion_values(calc, std::span(&v, 1), s.points);
  const auto e = st::estimator(d, 1, 2, eps);
  for (std::size_t p = 0; p < e.values.size(); ++p) {
    const double se = std::sqrt(std::abs(var.values[p]) / o.samples);
    EXPECT_LE(std::abs(mean.values[p] - e.values[p]), 3.0 * se + 10.0 * std::pow(eps, 4));
  }
}

TEST(Uq, ResidualAndFailures) {
  st::MomentEstimate a;
  a.values = {cd(1, 2), cd(-3, 0.5)};
  EXPECT_EQ(st::estimation_residual(a, a), 0.0);
  st::MomentEstimate b = a;
  b.values.pop_back();
  EXPECT_THROW(st::estimation_residual(a, b), st::MismatchError);

  Fixture s;
  const st::RandomPerturbation pert{st::fourier_basis(s.curve, 1), 5.0};
  st::MonteCarloOptions o;
  o.samples = 10;
  EXPECT_THROW(st::monte_carlo_samples(s.problem, s.curve, pert, s.points, o), st::SamplingError);
}
