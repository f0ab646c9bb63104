// shapetaylor: experiment runner.
//
//   shapetaylor <solve|residual-sweep|error-table|uq> --config FILE [--out DIR]
//               [--seed N] [--threads N] [--grid]
//
// Writes <subcommand>.csv and <subcommand>.json (full config + version) into
// --out. Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "shapetaylor/experiment.hpp"

namespace st = shapetaylor;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigFailure = 2;
constexpr int kNumericalFailure = 3;

class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : os_(path) {
    if (!os_) throw std::runtime_error("cannot write " + path.string());
    os_ << header << '\n';
  }
  template <typename... T>
  void row(const T&... cells) {
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << cell(cells)), ...);
    os_ << '\n';
  }

 private:
  static std::string cell(double x) { return st::detail::format_real(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  std::ofstream os_;
};

nlohmann::json to_json(const boost::property_tree::ptree& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, child] : t) {
    j[key] = child.empty() ? nlohmann::json(child.data()) : to_json(child);
  }
  return j;
}

void write_sidecar(const fs::path& path, const std::string& command, const st::ExperimentConfig& c,
                   const nlohmann::json& extra, double seconds) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = st::kVersion;
  j["config"] = to_json(st::to_ptree(c));
  j["runtime_seconds"] = seconds;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

nlohmann::json run(const std::string& command, const st::ExperimentConfig& c, const fs::path& out, bool grid) {
  nlohmann::json extra = nlohmann::json::object();
  if (command == "solve") {
    Csv csv(out / "solve.csv", "k,point,x,y,re,im,total_re,total_im");
    for (const auto& r : st::run_solve(c)) {
      csv.row(r.k, r.point, r.x, r.y, r.scattered.real(), r.scattered.imag(), r.total.real(), r.total.imag());
    }
    if (grid) {
      Csv g(out / "solve_grid.csv", "k,ix,iy,x,y,total_re,total_im");
      for (const auto& r : st::run_grid(c)) g.row(r.k, r.ix, r.iy, r.x, r.y, r.total.real(), r.total.imag());
      extra["grid_file"] = "solve_grid.csv";
    }
  } else if (command == "residual-sweep") {
    Csv csv(out / "residual-sweep.csv", "k,eps,order,residual,error_sum");
    for (const auto& r : st::run_residual_sweep(c)) csv.row(r.k, r.eps, r.order, r.residual, r.error_sum);
  } else if (command == "error-table") {
    Csv csv(out / "error-table.csv", "k,eps,point,x,y,order,rel_error");
    for (const auto& r : st::run_error_table(c)) csv.row(r.k, r.eps, r.point, r.x, r.y, r.order, r.rel_error);
  } else {
    const auto res = st::run_uq(c);
    Csv csv(out / "uq.csv", "eps,moment,central,method,order,point,x,y,re,im,residual");
    for (const auto& r : res.rows) {
      csv.row(r.eps, r.moment, r.central ? 1 : 0, st::to_string(r.method), r.order, r.point, r.x, r.y,
              r.value.real(), r.value.imag(), r.residual);
    }
    extra["samples"] = res.samples;
    extra["failures"] = res.failures;
    extra["seed"] = res.seed;
  }
  return extra;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape Taylor expansions for 2D Helmholtz scattering"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  bool grid = false;

  for (const char* name : {"solve", "residual-sweep", "error-table", "uq"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment configuration (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides uq.seed)");
    sub->add_option("--threads", threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    if (std::string(name) == "solve") sub->add_flag("--grid", grid, "also dump the total field on [grid]");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  st::ExperimentConfig config;
  try {
    config = st::load_config(config_path);
    if (threads > 0) config.threads = threads;
    if (app.get_subcommands().front()->count("--seed") > 0) config.uq.seed = seed;
    st::validate(config);
    fs::create_directories(out_dir);
  } catch (const st::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto extra = run(command, config, out_dir, grid);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_sidecar(fs::path(out_dir) / (command + ".json"), command, config, extra, seconds);
    std::cerr << command << ": wrote " << (fs::path(out_dir) / (command + ".csv")).string() << " in " << seconds
              << " s\n";
  } catch (const st::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const st::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return 0;
}
