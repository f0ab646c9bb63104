#pragma once

// Moments of the scattered field for the random boundary
//   x + eps sum_i omega_i v_i(x) n(x),   omega_i ~ U[-1, 1] independent,
// from shape Taylor expansions and from Monte Carlo sampling.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "shapetaylor/error.hpp"
#include "shapetaylor/geometry.hpp"
#include "shapetaylor/scatter.hpp"
#include "shapetaylor/shapecalc.hpp"

namespace shapetaylor {

/// m = 2h + 1 fields: 1, cos t, ..., cos h t, sin t, ..., sin h t.
inline std::vector<VelocityField> fourier_basis(const BoundaryCurve& curve, int m) {
  if (m < 1 || m % 2 == 0) throw std::invalid_argument("Fourier basis size must be odd and positive");
  const int h = (m - 1) / 2;
  std::vector<VelocityField> out;
  out.push_back(VelocityField::constant(curve, 1.0));
  for (int j = 1; j <= h; ++j) out.push_back(VelocityField::sample(curve, [j](double t) { return std::cos(j * t); }));
  for (int j = 1; j <= h; ++j) out.push_back(VelocityField::sample(curve, [j](double t) { return std::sin(j * t); }));
  return out;
}

struct RandomPerturbation {
  std::vector<VelocityField> basis;
  double eps = 0.0;
};

enum class MomentMethod { estimator, monte_carlo };

inline const char* to_string(MomentMethod m) { return m == MomentMethod::estimator ? "estimator" : "monte_carlo"; }

/// Complex moment values per observation point.
struct MomentEstimate {
  int moment = 1;
  int order = 0;  // Taylor order of the estimator, -1 for Monte Carlo
  bool central = false;
  MomentMethod method = MomentMethod::estimator;
  double eps = 0.0;
  std::vector<cdouble> values;
  std::size_t samples = 0;
  std::size_t failures = 0;
  std::uint64_t seed = 0;
};

/// u, delta_{v_i} u and delta_{[v_i, v_i]} u at the observation points.
struct ExpansionValues {
  int max_order = 0;
  std::vector<cdouble> u;
  std::vector<std::vector<cdouble>> first;   // [field][point]
  std::vector<std::vector<cdouble>> second;  // [field][point]
};

inline ExpansionValues expansion_values(const ShapeCalculus& calc, std::span<const VelocityField> basis,
                                        const Points& points, int max_order = 2) {
  if (max_order < 0 || max_order > 2) throw UnsupportedOrderError("moment estimators use orders 0 to 2");
  ExpansionValues out;
  out.max_order = max_order;
  out.u = calc.forward().eval(points);
  for (const auto& v : basis) {
    if (max_order == 0) break;
    const auto d1 = calc.first(v);
    out.first.push_back(d1.eval(points));
    if (max_order == 2) out.second.push_back(calc.second(v, v, d1, d1).eval(points));
  }
  return out;
}

inline ExpansionValues expansion_values(const std::vector<DerivativeStack>& stacks, const Points& points) {
  if (stacks.empty()) throw MissingOrderError("no derivative stacks given");
  ExpansionValues out;
  out.max_order = 2;
  for (const auto& s : stacks) out.max_order = std::min(out.max_order, s.max_order());
  out.u = stacks.front().order(0).eval(points);
  for (const auto& s : stacks) {
    if (out.max_order >= 1) out.first.push_back(s.order(1).eval(points));
    if (out.max_order >= 2) out.second.push_back(s.order(2).eval(points));
  }
  return out;
}

namespace detail {

inline cdouble ipow(cdouble z, int n) {
  cdouble r = 1.0;
  for (int i = 0; i < n; ++i) r *= z;
  return r;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace detail

/// E^n_N: u^n, plus (eps^2/3) sum_i C(n,2) u^{n-2} (delta_i u)^2 for N >= 1,
/// plus (eps^2/3) sum_i n u^{n-1} delta_[i,i] u / 2 for N = 2.
inline MomentEstimate estimator(const ExpansionValues& d, int n, int order, double eps) {
  if (n < 1) throw std::invalid_argument("moment order must be >= 1");
  if (order < 0 || order > 2) throw UnsupportedOrderError("estimator order must be 0, 1 or 2");
  if (order > d.max_order) throw MissingOrderError("estimator order exceeds the available shape derivatives");
  MomentEstimate out;
  out.moment = n;
  out.order = order;
  out.eps = eps;
  out.values.resize(d.u.size());
  const double w = eps * eps / 3.0;
  const double c2 = detail::binomial(n, 2);
  for (std::size_t p = 0; p < d.u.size(); ++p) {
    const cdouble u = d.u[p];
    cdouble value = detail::ipow(u, n);
    if (order >= 1 && n >= 2) {
      cdouble s = 0.0;
      for (const auto& f : d.first) s += f[p] * f[p];
      value += w * c2 * detail::ipow(u, n - 2) * s;
    }
    if (order == 2) {
      cdouble s = 0.0;
      for (const auto& f : d.second) s += f[p];
      value += w * static_cast<double>(n) * detail::ipow(u, n - 1) * 0.5 * s;
    }
    out.values[p] = value;
  }
  return out;
}

/// Leading-order variance (eps^2/3) sum_i (delta_i u)^2.
inline MomentEstimate variance_estimator(const ExpansionValues& d, double eps) {
  if (d.max_order < 1) throw MissingOrderError("variance estimator needs first-order shape derivatives");
  MomentEstimate out;
  out.moment = 2;
  out.order = 1;
  out.central = true;
  out.eps = eps;
  out.values.assign(d.u.size(), 0.0);
  for (std::size_t p = 0; p < d.u.size(); ++p) {
    cdouble s = 0.0;
    for (const auto& f : d.first) s += f[p] * f[p];
    out.values[p] = eps * eps / 3.0 * s;
  }
  return out;
}

/// sum_x |reference(x) - estimate(x)|.
inline double estimation_residual(const MomentEstimate& reference, const MomentEstimate& estimate) {
  if (reference.values.size() != estimate.values.size()) {
    throw MismatchError("moment estimates on different observation sets");
  }
  double r = 0.0;
  for (std::size_t p = 0; p < reference.values.size(); ++p) r += std::abs(reference.values[p] - estimate.values[p]);
  return r;
}

struct MonteCarloOptions {
  std::size_t samples = 3000;
  std::uint64_t seed = 20240607;
  unsigned threads = 1;
  double max_failure_rate = 0.01;
};

/// Field values of every sample; failed samples are kept as empty rows.
struct MonteCarloSamples {
  std::uint64_t seed = 0;
  double eps = 0.0;
  std::vector<std::vector<cdouble>> values;  // [sample][point]
  std::size_t failures = 0;
  bool deterministic = false;  // eps = 0: every sample is the forward field
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// omega for one sample: mt19937_64 seeded from (seed, index), so draws do not
/// depend on thread count or scheduling.
inline std::vector<double> sample_omega(std::uint64_t seed, std::size_t index, std::size_t m) {
  std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(index))));
  std::vector<double> w(m);
  for (auto& x : w) x = 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
  return w;
}

inline MonteCarloSamples monte_carlo_samples(const ScatterProblem& problem, const BoundaryCurve& curve,
                                             const RandomPerturbation& perturbation, const Points& points,
                                             const MonteCarloOptions& options) {
  if (options.samples < 1) throw std::invalid_argument("Monte Carlo needs at least one sample");
  if (perturbation.basis.empty()) throw std::invalid_argument("random perturbation has no basis fields");
  MonteCarloSamples out;
  out.seed = options.seed;
  out.eps = perturbation.eps;
  out.values.resize(options.samples);
  if (perturbation.eps == 0.0) {
    out.deterministic = true;
    const auto u = solve(problem, curve).eval(points);
    for (auto& row : out.values) row = u;
    return out;
  }
  const std::size_t m = perturbation.basis.size();
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < options.samples; i = next++) {
      std::vector<double> eps = sample_omega(options.seed, i, m);
      for (auto& e : eps) e *= perturbation.eps;
      try {
        out.values[i] = solve(problem, perturb(curve, perturbation.basis, eps)).eval(points);
      } catch (const Error&) {
        ++failures;
      }
    }
  };
  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  out.failures = failures;
  if (static_cast<double>(out.failures) > options.max_failure_rate * static_cast<double>(options.samples)) {
    throw SamplingError(std::to_string(out.failures) + " of " + std::to_string(options.samples) +
                        " Monte Carlo samples failed");
  }
  return out;
}

/// Sample mean of u^n, or of (u - mean)^n when central (two-pass).
inline MomentEstimate monte_carlo_moment(const MonteCarloSamples& s, int n, bool central) {
  if (n < 1) throw std::invalid_argument("moment order must be >= 1");
  MomentEstimate out;
  out.moment = n;
  out.order = -1;
  out.central = central;
  out.method = MomentMethod::monte_carlo;
  out.eps = s.eps;
  out.samples = s.values.size();
  out.failures = s.failures;
  out.seed = s.seed;
  std::size_t points = 0;
  for (const auto& row : s.values) points = std::max(points, row.size());
  out.values.assign(points, 0.0);
  if (s.deterministic) {
    for (std::size_t p = 0; p < points; ++p) out.values[p] = central ? cdouble(0.0) : detail::ipow(s.values[0][p], n);
    return out;
  }
  const double count = static_cast<double>(s.values.size() - s.failures);
  std::vector<cdouble> mean(points, 0.0);
  if (central) {
    for (const auto& row : s.values) {
      for (std::size_t p = 0; p < row.size(); ++p) mean[p] += row[p];
    }
    for (auto& m : mean) m /= count;
  }
  for (const auto& row : s.values) {
    for (std::size_t p = 0; p < row.size(); ++p) out.values[p] += detail::ipow(row[p] - mean[p], n);
  }
  for (auto& v : out.values) v /= count;
  return out;
}

inline MomentEstimate monte_carlo_moment(const ScatterProblem& problem, const BoundaryCurve& curve,
                                         const RandomPerturbation& perturbation, int n, bool central,
                                         const MonteCarloOptions& options, const Points& points) {
  return monte_carlo_moment(monte_carlo_samples(problem, curve, perturbation, points, options), n, central);
}

}  // namespace shapetaylor
