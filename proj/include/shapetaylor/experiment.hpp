#pragma once

// Configuration-driven experiment runners: forward solves, Taylor residual
// sweeps, relative-error tables and moment studies.

#include <Eigen/Dense>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shapetaylor/error.hpp"
#include "shapetaylor/geometry.hpp"
#include "shapetaylor/scatter.hpp"
#include "shapetaylor/shapecalc.hpp"
#include "shapetaylor/uq.hpp"

namespace shapetaylor {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what) {}
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// "2.5", "pi", "2pi", "0.5*pi", "-1e-3".
inline bool parse_real(std::string_view text, double& out) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\t') s += c;
  }
  if (s.empty()) return false;
  double scale = 1.0;
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
    scale = std::numbers::pi;
    s.resize(s.size() - 2);
    if (!s.empty() && s.back() == '*') s.pop_back();
    if (s.empty() || s == "+") s = "1";
    if (s == "-") s = "-1";
  }
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  out = v * scale;
  return true;
}

/// Shortest representation that reads back to the same double.
inline std::string format_real(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& v, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}

/// Runs f(0..n-1) on up to `threads` workers; rethrows the first failure.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Velocity amplitude as a sum of terms c * f1(p1 t + phi1) * f2(...) with
/// f in {sin, cos}, e.g. "0.25*sin(2t)*cos(3t) - 0.175*sin(4t) + 0.1".
class VelocityExpression {
 public:
  struct Factor {
    bool sine = true;
    double freq = 0.0;
    double phase = 0.0;
    bool operator==(const Factor&) const = default;
  };
  struct Term {
    double coef = 1.0;
    std::vector<Factor> factors;
    bool operator==(const Term&) const = default;
  };

  VelocityExpression() = default;

  static VelocityExpression parse(std::string_view text) {
    VelocityExpression e;
    e.source_ = detail::trim(text);
    Parser p{e.source_, 0};
    p.skip();
    if (p.done()) throw std::invalid_argument("empty velocity expression");
    bool first = true;
    while (!p.done()) {
      double sign = 1.0;
      if (p.peek() == '+' || p.peek() == '-') {
        sign = p.peek() == '-' ? -1.0 : 1.0;
        p.get();
      } else if (!first) {
        p.fail("expected '+' or '-'");
      }
      Term t = p.term();
      t.coef *= sign;
      e.terms_.push_back(std::move(t));
      first = false;
    }
    return e;
  }

  [[nodiscard]] double operator()(double t) const {
    double sum = 0.0;
    for (const auto& term : terms_) {
      double x = term.coef;
      for (const auto& f : term.factors) x *= f.sine ? std::sin(f.freq * t + f.phase) : std::cos(f.freq * t + f.phase);
      sum += x;
    }
    return sum;
  }

  [[nodiscard]] VelocityField sample(const BoundaryCurve& curve) const {
    return VelocityField::sample(curve, [this](double t) { return (*this)(t); });
  }

  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] const std::vector<Term>& terms() const { return terms_; }
  [[nodiscard]] bool empty() const { return terms_.empty(); }
  bool operator==(const VelocityExpression& o) const { return terms_ == o.terms_; }

 private:
  struct Parser {
    std::string_view s;
    std::size_t i;

    [[noreturn]] void fail(const std::string& what) const {
      throw std::invalid_argument("velocity expression at column " + std::to_string(i + 1) + ": " + what);
    }
    void skip() {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    }
    [[nodiscard]] bool done() const { return i >= s.size(); }
    [[nodiscard]] char peek() const { return done() ? '\0' : s[i]; }
    char get() {
      const char c = s[i++];
      skip();
      return c;
    }
    bool word(std::string_view w) {
      if (s.substr(i, w.size()) != w) return false;
      i += w.size();
      skip();
      return true;
    }
    double number() {
      if (word("pi")) return std::numbers::pi;
      const std::size_t start = i;
      while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                              ((s[i] == 'e' || s[i] == 'E') && i + 1 < s.size() &&
                               (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '-' || s[i + 1] == '+')) ||
                              ((s[i] == '-' || s[i] == '+') && i > start && (s[i - 1] == 'e' || s[i - 1] == 'E')))) {
        ++i;
      }
      double v = 0.0;
      if (i == start || !detail::parse_real(s.substr(start, i - start), v)) {
        i = start;
        fail("expected a number");
      }
      skip();
      if (word("pi")) v *= std::numbers::pi;
      return v;
    }
    Factor factor(bool sine) {
      Factor f{sine, 1.0, 0.0};
      if (peek() != '(') fail("expected '('");
      get();
      if (peek() != 't') {
        f.freq = number();
        if (peek() == '*') get();
      }
      if (peek() != 't') fail("expected 't'");
      get();
      if (peek() == '+' || peek() == '-') {
        const double sign = get() == '-' ? -1.0 : 1.0;
        f.phase = sign * number();
      }
      if (peek() != ')') fail("expected ')'");
      get();
      return f;
    }
    Term term() {
      Term t;
      for (;;) {
        if (word("sin")) {
          t.factors.push_back(factor(true));
        } else if (word("cos")) {
          t.factors.push_back(factor(false));
        } else {
          t.coef *= number();
        }
        if (peek() != '*') break;
        get();
      }
      return t;
    }
  };

  std::string source_;
  std::vector<Term> terms_;
};

struct GeometryConfig {
  std::string shape = "circle";
  double radius = 2.0;
  double a = 3.0;
  double b = 2.0;
  int nodes = 400;
  bool operator==(const GeometryConfig&) const = default;
};

struct ProblemConfig {
  BoundaryCondition bc = BoundaryCondition::sound_soft;
  double lambda = 0.0;
  double alpha_in = 1.0;
  double alpha_ex = 1.0;
  bool operator==(const ProblemConfig&) const = default;
};

struct IncidentConfig {
  std::string type = "plane";
  std::vector<double> k{3.0};
  Eigen::Vector2d direction{std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2};
  Eigen::Vector2d source{3.0, 4.0};
  bool operator==(const IncidentConfig&) const = default;
};

struct TaylorConfig {
  VelocityExpression velocity;
  int order = 2;
  std::vector<double> eps{0.02, 0.04, 0.06, 0.08, 0.1, 0.12};
  SecondOrderRule rule = SecondOrderRule::derived;
  bool operator==(const TaylorConfig&) const = default;
};

/// Ring of `count` points at `radius`, unless explicit points are given.
struct ObservationConfig {
  double radius = 5.0;
  int count = 64;
  std::vector<Eigen::Vector2d> points;
  bool operator==(const ObservationConfig&) const = default;
};

struct UqConfig {
  bool enabled = false;
  int basis = 11;
  std::vector<double> eps{0.03};
  std::size_t samples = 3000;
  std::uint64_t seed = 20240607;
  std::vector<int> moments{1, 2, 4, 7};
  bool operator==(const UqConfig&) const = default;
};

/// Total-field dump on an nx-by-ny lattice.
struct GridConfig {
  double xmin = -6.0;
  double xmax = 6.0;
  double ymin = -6.0;
  double ymax = 6.0;
  int nx = 121;
  int ny = 121;
  bool operator==(const GridConfig&) const = default;
};

struct ExperimentConfig {
  std::string name;
  GeometryConfig geometry;
  ProblemConfig problem;
  IncidentConfig incident;
  TaylorConfig taylor;
  ObservationConfig observation;
  UqConfig uq;
  GridConfig grid;
  unsigned threads = 1;
  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline BoundaryCondition parse_bc(const std::string& s, const std::string& path) {
  for (auto bc : {BoundaryCondition::sound_soft, BoundaryCondition::sound_hard, BoundaryCondition::impedance,
                  BoundaryCondition::transmission}) {
    if (s == to_string(bc)) return bc;
  }
  throw ConfigError(path, "unknown boundary condition '" + s + "'");
}

class Reader {
 public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) throw ConfigError(section, "keys must live in a section");
      for (const auto& [key, value] : body) {
        if (!value.empty()) throw ConfigError(section + "." + key, "nested keys are not supported");
        present_.insert(section + "." + key);
      }
    }
  }

  [[nodiscard]] bool has(const std::string& path) const { return present_.count(path) != 0; }
  [[nodiscard]] bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

  std::string text(const std::string& path) {
    used_.insert(path);
    return trim(tree_.get<std::string>(path));
  }

  void real(const std::string& path, double& out) {
    if (!has(path)) return;
    if (!parse_real(text(path), out) || !std::isfinite(out)) throw ConfigError(path, "expected a real number");
  }

  template <typename I>
  void integer(const std::string& path, I& out) {
    if (!has(path)) return;
    const std::string s = text(path);
    I v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError(path, "expected an integer");
    out = v;
  }

  void reals(const std::string& path, std::vector<double>& out) {
    if (!has(path)) return;
    out.clear();
    for (const auto& item : split(text(path), ',')) {
      double v = 0.0;
      if (!parse_real(item, v) || !std::isfinite(v)) throw ConfigError(path, "expected a list of real numbers");
      out.push_back(v);
    }
  }

  void integers(const std::string& path, std::vector<int>& out) {
    if (!has(path)) return;
    out.clear();
    for (const auto& item : split(text(path), ',')) {
      int v = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
        throw ConfigError(path, "expected a list of integers");
      }
      out.push_back(v);
    }
  }

  void vector2(const std::string& path, Eigen::Vector2d& out) {
    std::vector<double> v;
    reals(path, v);
    if (!has(path)) return;
    if (v.size() != 2) throw ConfigError(path, "expected two components");
    out = {v[0], v[1]};
  }

  /// "[x0, y0], [x1, y1], ..."
  void points(const std::string& path, std::vector<Eigen::Vector2d>& out) {
    if (!has(path)) return;
    out.clear();
    const std::string s = text(path);
    std::size_t i = 0;
    while (i < s.size()) {
      const auto open = s.find('[', i);
      if (open == std::string::npos) {
        if (!trim(std::string_view(s).substr(i)).empty()) throw ConfigError(path, "expected [x, y] pairs");
        break;
      }
      if (!trim(std::string_view(s).substr(i, open - i)).empty() &&
          trim(std::string_view(s).substr(i, open - i)) != ",") {
        throw ConfigError(path, "expected [x, y] pairs");
      }
      const auto close = s.find(']', open);
      if (close == std::string::npos) throw ConfigError(path, "unterminated point");
      const auto xy = split(std::string_view(s).substr(open + 1, close - open - 1), ',');
      double x = 0.0;
      double y = 0.0;
      if (xy.size() != 2 || !parse_real(xy[0], x) || !parse_real(xy[1], y)) {
        throw ConfigError(path, "expected [x, y] pairs");
      }
      out.emplace_back(x, y);
      i = close + 1;
    }
    if (out.empty()) throw ConfigError(path, "no points given");
  }

  void finish() const {
    for (const auto& p : present_) {
      if (!used_.count(p)) throw ConfigError(p, "unknown key");
    }
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::set<std::string> present_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Checks every field against the module preconditions.
inline void validate(const ExperimentConfig& c) {
  const auto& g = c.geometry;
  if (g.shape == "circle") {
    if (!(g.radius > 0.0)) throw ConfigError("geometry.radius", "must be positive");
  } else if (g.shape == "ellipse") {
    if (!(g.a > 0.0)) throw ConfigError("geometry.a", "must be positive");
    if (!(g.b > 0.0)) throw ConfigError("geometry.b", "must be positive");
  } else {
    throw ConfigError("geometry.shape", "must be circle or ellipse");
  }
  if (g.nodes < 8 || g.nodes % 2 != 0) throw ConfigError("geometry.nodes", "must be even and at least 8");

  const auto& p = c.problem;
  if (!(p.alpha_ex > 0.0)) throw ConfigError("problem.alpha_ex", "must be positive");
  if (!(p.alpha_in > 0.0)) throw ConfigError("problem.alpha_in", "must be positive");
  if (p.bc != BoundaryCondition::impedance && p.lambda != 0.0) {
    throw ConfigError("problem.lambda", "only used by the impedance condition");
  }
  if (p.bc != BoundaryCondition::transmission && p.alpha_in != 1.0) {
    throw ConfigError("problem.alpha_in", "only used by the transmission condition");
  }

  const auto& in = c.incident;
  if (in.type != "plane" && in.type != "point") throw ConfigError("incident.type", "must be plane or point");
  if (in.k.empty()) throw ConfigError("incident.k", "at least one wavenumber required");
  for (double k : in.k) {
    if (!(k > 0.0)) throw ConfigError("incident.k", "wavenumbers must be positive");
  }
  if (in.type == "plane" && !(in.direction.norm() > 0.0)) throw ConfigError("incident.direction", "must be nonzero");

  const auto& t = c.taylor;
  if (t.order < 0) throw ConfigError("taylor.order", "must be nonnegative");
  if (t.order > max_supported_order(p.bc)) {
    throw ConfigError("taylor.order", "exceeds the highest order available for " + std::string(to_string(p.bc)));
  }
  for (double e : t.eps) {
    if (!(e >= 0.0)) throw ConfigError("taylor.eps", "must be nonnegative");
  }
  if (t.rule == SecondOrderRule::closed_form && p.bc != BoundaryCondition::sound_hard) {
    throw ConfigError("taylor.rule", "the closed_form rule exists for sound_hard only");
  }

  const auto& o = c.observation;
  if (o.points.empty()) {
    if (!(o.radius > 0.0)) throw ConfigError("observation.radius", "must be positive");
    if (o.count < 1) throw ConfigError("observation.count", "must be positive");
  }

  const auto& u = c.uq;
  if (u.enabled) {
    if (u.basis < 1 || u.basis % 2 == 0) throw ConfigError("uq.basis", "must be odd and positive");
    if (u.samples < 1) throw ConfigError("uq.samples", "must be positive");
    if (u.eps.empty()) throw ConfigError("uq.eps", "at least one value required");
    for (double e : u.eps) {
      if (!(e >= 0.0)) throw ConfigError("uq.eps", "must be nonnegative");
    }
    if (u.moments.empty()) throw ConfigError("uq.moments", "at least one moment order required");
    for (int n : u.moments) {
      if (n < 1) throw ConfigError("uq.moments", "moment orders must be >= 1");
    }
    if (in.k.size() != 1) throw ConfigError("incident.k", "a moment study takes a single wavenumber");
  }

  const auto& gr = c.grid;
  if (!(gr.xmax > gr.xmin)) throw ConfigError("grid.xmax", "must exceed grid.xmin");
  if (!(gr.ymax > gr.ymin)) throw ConfigError("grid.ymax", "must exceed grid.ymin");
  if (gr.nx < 1) throw ConfigError("grid.nx", "must be positive");
  if (gr.ny < 1) throw ConfigError("grid.ny", "must be positive");
  if (c.threads < 1) throw ConfigError("run.threads", "must be positive");
}

inline ExperimentConfig parse_config(const boost::property_tree::ptree& tree) {
  detail::Reader r(tree);
  ExperimentConfig c;
  if (r.has("run.name")) c.name = r.text("run.name");
  r.integer("run.threads", c.threads);

  if (r.has("geometry.shape")) c.geometry.shape = r.text("geometry.shape");
  r.real("geometry.radius", c.geometry.radius);
  r.real("geometry.a", c.geometry.a);
  r.real("geometry.b", c.geometry.b);
  r.integer("geometry.nodes", c.geometry.nodes);

  if (r.has("problem.bc")) c.problem.bc = detail::parse_bc(r.text("problem.bc"), "problem.bc");
  r.real("problem.lambda", c.problem.lambda);
  r.real("problem.alpha_in", c.problem.alpha_in);
  r.real("problem.alpha_ex", c.problem.alpha_ex);

  if (r.has("incident.type")) c.incident.type = r.text("incident.type");
  r.reals("incident.k", c.incident.k);
  r.vector2("incident.direction", c.incident.direction);
  r.vector2("incident.source", c.incident.source);

  if (r.has("taylor.velocity")) {
    try {
      c.taylor.velocity = VelocityExpression::parse(r.text("taylor.velocity"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("taylor.velocity", e.what());
    }
  }
  r.integer("taylor.order", c.taylor.order);
  r.reals("taylor.eps", c.taylor.eps);
  if (r.has("taylor.rule")) {
    const auto s = r.text("taylor.rule");
    if (s == "derived") {
      c.taylor.rule = SecondOrderRule::derived;
    } else if (s == "closed_form") {
      c.taylor.rule = SecondOrderRule::closed_form;
    } else {
      throw ConfigError("taylor.rule", "must be derived or closed_form");
    }
  }

  r.real("observation.radius", c.observation.radius);
  r.integer("observation.count", c.observation.count);
  r.points("observation.points", c.observation.points);

  if (r.has_section("uq")) {
    c.uq.enabled = true;
    r.integer("uq.basis", c.uq.basis);
    r.reals("uq.eps", c.uq.eps);
    r.integer("uq.samples", c.uq.samples);
    r.integer("uq.seed", c.uq.seed);
    r.integers("uq.moments", c.uq.moments);
  }

  r.real("grid.xmin", c.grid.xmin);
  r.real("grid.xmax", c.grid.xmax);
  r.real("grid.ymin", c.grid.ymin);
  r.real("grid.ymax", c.grid.ymax);
  r.integer("grid.nx", c.grid.nx);
  r.integer("grid.ny", c.grid.ny);

  r.finish();
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& ini) {
  boost::property_tree::ptree tree;
  std::istringstream is(ini);
  try {
    boost::property_tree::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  return parse_config(tree);
}

inline ExperimentConfig load_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.line()), e.message());
  }
  return parse_config(tree);
}

/// Full configuration, defaults included; parse_config inverts it.
inline boost::property_tree::ptree to_ptree(const ExperimentConfig& c) {
  using detail::format_real;
  boost::property_tree::ptree t;
  const auto reals = [](const std::vector<double>& v) { return detail::join(v, detail::format_real); };
  const auto vec = [](const Eigen::Vector2d& v) { return format_real(v.x()) + ", " + format_real(v.y()); };
  if (!c.name.empty()) t.put("run.name", c.name);
  t.put("run.threads", c.threads);
  t.put("geometry.shape", c.geometry.shape);
  t.put("geometry.radius", format_real(c.geometry.radius));
  t.put("geometry.a", format_real(c.geometry.a));
  t.put("geometry.b", format_real(c.geometry.b));
  t.put("geometry.nodes", c.geometry.nodes);
  t.put("problem.bc", to_string(c.problem.bc));
  t.put("problem.lambda", format_real(c.problem.lambda));
  t.put("problem.alpha_in", format_real(c.problem.alpha_in));
  t.put("problem.alpha_ex", format_real(c.problem.alpha_ex));
  t.put("incident.type", c.incident.type);
  t.put("incident.k", reals(c.incident.k));
  t.put("incident.direction", vec(c.incident.direction));
  t.put("incident.source", vec(c.incident.source));
  if (!c.taylor.velocity.empty()) t.put("taylor.velocity", c.taylor.velocity.source());
  t.put("taylor.order", c.taylor.order);
  t.put("taylor.eps", reals(c.taylor.eps));
  t.put("taylor.rule", to_string(c.taylor.rule));
  t.put("observation.radius", format_real(c.observation.radius));
  t.put("observation.count", c.observation.count);
  if (!c.observation.points.empty()) {
    t.put("observation.points", detail::join(c.observation.points, [&](const Eigen::Vector2d& p) {
            return "[" + vec(p) + "]";
          }));
  }
  if (c.uq.enabled) {
    t.put("uq.basis", c.uq.basis);
    t.put("uq.eps", reals(c.uq.eps));
    t.put("uq.samples", c.uq.samples);
    t.put("uq.seed", c.uq.seed);
    t.put("uq.moments", detail::join(c.uq.moments, [](int n) { return std::to_string(n); }));
  }
  t.put("grid.xmin", format_real(c.grid.xmin));
  t.put("grid.xmax", format_real(c.grid.xmax));
  t.put("grid.ymin", format_real(c.grid.ymin));
  t.put("grid.ymax", format_real(c.grid.ymax));
  t.put("grid.nx", c.grid.nx);
  t.put("grid.ny", c.grid.ny);
  return t;
}

inline std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream os;
  boost::property_tree::write_ini(os, to_ptree(c));
  return os.str();
}

inline BoundaryCurve make_curve(const GeometryConfig& g) {
  return g.shape == "circle" ? make_circle(g.radius, g.nodes) : make_ellipse(g.a, g.b, g.nodes);
}

inline IncidentField make_incident(const IncidentConfig& in, double k) {
  return in.type == "plane" ? IncidentField::plane(k, in.direction) : IncidentField::point_source(k, in.source);
}

inline ScatterProblem make_problem(const ExperimentConfig& c, double k) {
  return {c.problem.bc, make_incident(c.incident, k), {c.problem.alpha_ex, c.problem.alpha_in, c.problem.lambda}};
}

inline Points ring_points(double radius, int count) {
  Points p(2, count);
  for (int j = 0; j < count; ++j) {
    const double t = 2.0 * std::numbers::pi * j / count;
    p.col(j) << radius * std::cos(t), radius * std::sin(t);
  }
  return p;
}

inline Points observation_points(const ObservationConfig& o) {
  if (o.points.empty()) return ring_points(o.radius, o.count);
  Points p(2, static_cast<Eigen::Index>(o.points.size()));
  for (std::size_t j = 0; j < o.points.size(); ++j) p.col(static_cast<Eigen::Index>(j)) = o.points[j];
  return p;
}

inline void require_velocity(const ExperimentConfig& c) {
  if (c.taylor.velocity.empty()) throw ConfigError("taylor.velocity", "required by this experiment");
}

struct FieldRow {
  double k;
  int point;
  double x, y;
  cdouble scattered;
  cdouble total;
};

/// Forward solve at every wavenumber.
inline std::vector<FieldRow> run_solve(const ExperimentConfig& c) {
  const Points pts = observation_points(c.observation);
  std::vector<std::vector<FieldRow>> parts(c.incident.k.size());
  detail::parallel_for(parts.size(), c.threads, [&](std::size_t i) {
    const double k = c.incident.k[i];
    const auto problem = make_problem(c, k);
    const auto sol = solve(problem, make_curve(c.geometry));
    const auto u = sol.eval(pts);
    const auto tot = eval_total(sol, problem.incident, pts);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      parts[i].push_back({k, static_cast<int>(j), pts(0, j), pts(1, j), u[j], tot[j]});
    }
  });
  std::vector<FieldRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct GridRow {
  double k;
  int ix, iy;
  double x, y;
  cdouble total;  // NaN inside impenetrable scatterers
};

inline std::vector<GridRow> run_grid(const ExperimentConfig& c) {
  const auto& g = c.grid;
  const auto curve = make_curve(c.geometry);
  const bool penetrable = c.problem.bc == BoundaryCondition::transmission;
  std::vector<std::vector<GridRow>> parts(c.incident.k.size());
  detail::parallel_for(parts.size(), c.threads, [&](std::size_t i) {
    const double k = c.incident.k[i];
    const auto problem = make_problem(c, k);
    const auto sol = solve(problem, curve);
    std::vector<GridRow> rows;
    std::vector<Eigen::Vector2d> keep;
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) {
        const double x = g.nx == 1 ? g.xmin : g.xmin + (g.xmax - g.xmin) * ix / (g.nx - 1);
        const double y = g.ny == 1 ? g.ymin : g.ymin + (g.ymax - g.ymin) * iy / (g.ny - 1);
        rows.push_back({k, ix, iy, x, y, cdouble(std::numeric_limits<double>::quiet_NaN(), 0.0)});
        if (penetrable || !curve.contains({x, y})) keep.emplace_back(x, y);
      }
    }
    Points p(2, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) p.col(static_cast<Eigen::Index>(j)) = keep[j];
    const auto tot = eval_total(sol, problem.incident, p);
    std::size_t j = 0;
    for (auto& r : rows) {
      if (penetrable || !curve.contains({r.x, r.y})) r.total = tot[j++];
    }
    parts[i] = std::move(rows);
  });
  std::vector<GridRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct SweepRow {
  double k;
  double eps;
  int order;
  double residual;   // (sum_x |u_eps - T_N|)^(1/(N+1))
  double error_sum;  // sum_x |u_eps - T_N|
};

/// Res(eps, N) for every wavenumber, eps and N = 0..order.
inline std::vector<SweepRow> run_residual_sweep(const ExperimentConfig& c) {
  require_velocity(c);
  const Points pts = observation_points(c.observation);
  const auto& ks = c.incident.k;
  const auto& es = c.taylor.eps;
  std::vector<std::vector<SweepRow>> parts(ks.size() * es.size());
  std::vector<std::shared_ptr<const DerivativeStack>> stacks(ks.size());
  const auto curve = make_curve(c.geometry);
  const auto v = c.taylor.velocity.sample(curve);
  detail::parallel_for(ks.size(), c.threads, [&](std::size_t i) {
    const auto problem = make_problem(c, ks[i]);
    stacks[i] = std::make_shared<const DerivativeStack>(
        build_stack(solve(problem, curve), problem.incident, v, c.taylor.order, c.taylor.rule));
  });
  detail::parallel_for(parts.size(), c.threads, [&](std::size_t cell) {
    const std::size_t i = cell / es.size();
    const double eps = es[cell % es.size()];
    const auto problem = make_problem(c, ks[i]);
    std::vector<cdouble> up;
    if (eps != 0.0) up = perturbed_field(problem, curve, v, eps, pts);
    for (int n = 0; n <= c.taylor.order; ++n) {
      if (eps == 0.0) {
        parts[cell].push_back({ks[i], eps, n, 0.0, 0.0});
        continue;
      }
      const auto ty = taylor_eval(*stacks[i], eps, pts, n);
      const double res = residual(up, ty, n);
      parts[cell].push_back({ks[i], eps, n, res, std::pow(res, n + 1)});
    }
  });
  std::vector<SweepRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct ErrorRow {
  double k;
  double eps;
  int point;
  double x, y;
  int order;
  double rel_error;  // |u_eps - T_N| / |u_eps|
};

/// Relative error of the order-N Taylor expansion at each observation point.
inline std::vector<ErrorRow> run_error_table(const ExperimentConfig& c) {
  require_velocity(c);
  if (c.observation.points.empty()) throw ConfigError("observation.points", "required by an error table");
  const Points pts = observation_points(c.observation);
  const auto& ks = c.incident.k;
  const auto& es = c.taylor.eps;
  const auto curve = make_curve(c.geometry);
  const auto v = c.taylor.velocity.sample(curve);
  std::vector<std::shared_ptr<const DerivativeStack>> stacks(ks.size());
  detail::parallel_for(ks.size(), c.threads, [&](std::size_t i) {
    const auto problem = make_problem(c, ks[i]);
    stacks[i] = std::make_shared<const DerivativeStack>(
        build_stack(solve(problem, curve), problem.incident, v, c.taylor.order, c.taylor.rule));
  });
  std::vector<std::vector<ErrorRow>> parts(ks.size() * es.size());
  detail::parallel_for(parts.size(), c.threads, [&](std::size_t cell) {
    const std::size_t i = cell / es.size();
    const double eps = es[cell % es.size()];
    std::vector<double> rel(static_cast<std::size_t>(pts.cols()), 0.0);
    if (eps != 0.0) {
      const auto up = perturbed_field(make_problem(c, ks[i]), curve, v, eps, pts);
      const auto ty = taylor_eval(*stacks[i], eps, pts, c.taylor.order);
      for (std::size_t j = 0; j < rel.size(); ++j) rel[j] = std::abs(up[j] - ty[j]) / std::abs(up[j]);
    }
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      parts[cell].push_back({ks[i], eps, static_cast<int>(j), pts(0, j), pts(1, j), c.taylor.order,
                             rel[static_cast<std::size_t>(j)]});
    }
  });
  std::vector<ErrorRow> out;
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

struct UqRow {
  double eps;
  int moment;
  bool central;
  MomentMethod method;
  int order;  // estimator order, -1 for Monte Carlo
  int point;
  double x, y;
  cdouble value;
  double residual;  // against the Monte Carlo reference, summed over points
};

struct UqResult {
  std::vector<UqRow> rows;
  std::size_t samples = 0;
  std::size_t failures = 0;
  std::uint64_t seed = 0;
  /// Monte Carlo field values per eps, kept for reproducibility checks.
  std::vector<MonteCarloSamples> draws;
};

/// Monte Carlo reference and E^n_N (N = 0, 1, 2) for every moment order and
/// eps; plus the variance estimator against the central second moment.
/// Common random numbers: every eps reuses the same omega stream.
inline UqResult run_uq(const ExperimentConfig& c) {
  if (!c.uq.enabled) throw ConfigError("uq", "section required by a moment study");
  const Points pts = observation_points(c.observation);
  const auto curve = make_curve(c.geometry);
  const auto problem = make_problem(c, c.incident.k.front());
  const auto basis = fourier_basis(curve, c.uq.basis);
  const ShapeCalculus calc(solve(problem, curve), problem.incident);
  const auto d = expansion_values(calc, basis, pts, 2);

  UqResult out;
  out.seed = c.uq.seed;
  MonteCarloOptions opt;
  opt.samples = c.uq.samples;
  opt.seed = c.uq.seed;
  opt.threads = c.threads;
  const auto emit = [&](double eps, const MomentEstimate& e, double res) {
    for (std::size_t j = 0; j < e.values.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.rows.push_back({eps, e.moment, e.central, e.method, e.order, static_cast<int>(j), pts(0, jj), pts(1, jj),
                          e.values[j], res});
    }
  };
  for (double eps : c.uq.eps) {
    auto draws = monte_carlo_samples(problem, curve, {basis, eps}, pts, opt);
    out.samples = draws.values.size();
    out.failures = std::max(out.failures, draws.failures);
    for (int n : c.uq.moments) {
      const auto ref = monte_carlo_moment(draws, n, false);
      emit(eps, ref, 0.0);
      for (int order = 0; order <= 2; ++order) {
        const auto est = estimator(d, n, order, eps);
        emit(eps, est, estimation_residual(ref, est));
      }
    }
    const auto ref = monte_carlo_moment(draws, 2, true);
    emit(eps, ref, 0.0);
    const auto var = variance_estimator(d, eps);
    emit(eps, var, estimation_residual(ref, var));
    out.draws.push_back(std::move(draws));
  }
  return out;
}

/// Summed residual of one (eps, moment, central, order) cell.
inline double uq_residual(const UqResult& r, double eps, int moment, int order, bool central = false) {
  for (const auto& row : r.rows) {
    if (row.eps == eps && row.moment == moment && row.order == order && row.central == central &&
        row.method == MomentMethod::estimator) {
      return row.residual;
    }
  }
  throw MissingOrderError("no such moment cell");
}

}  // namespace shapetaylor
