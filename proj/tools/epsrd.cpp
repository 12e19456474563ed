// epsrd: bounds on the rate-distortion function under the epsilon-insensitive
// loss, a Blahut-Arimoto reference solver and the invariant checks, from the
// command line.
//
// Exit codes: 0 success, 1 invariant failure, 2 configuration error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "epsrd/ba_solver.hpp"
#include "epsrd/bounds.hpp"
#include "epsrd/sweep.hpp"
#include "epsrd/table_io.hpp"
#include "epsrd/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string source = "laplacian";
  double alpha = std::numbers::sqrt2;
  double sigma2 = 1.0;
  double epsilon = 0.1;
  double grid_min = -200.0;
  double grid_max = -0.5;
  std::size_t grid_count = 20;
  std::string grid_scale = "log";
  std::string grid_var = "s";
  std::string bounds = "slb,ru,rau,rge,trivial";
  std::size_t ba_n = 2001;
  double ba_tol = 1e-10;
  std::size_t ba_max_iter = 200000;
  double ba_gap_tol = 0.0;
  std::string format = "csv";
  std::string units = "nats";
  unsigned threads = 0;
  std::string output;
};

class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

epsrd::SourceSpec source_spec(const Options& o) {
  epsrd::SourceSpec spec;
  spec.set_kind(o.source);
  spec.alpha = o.alpha;
  spec.sigma2 = o.sigma2;
  return spec;
}

epsrd::BASettings ba_settings(const Options& o) {
  return {o.ba_n, o.ba_tol, o.ba_max_iter, o.ba_gap_tol};
}

unsigned thread_count(const Options& o) {
  return o.threads == 0 ? epsrd::default_thread_count() : o.threads;
}

epsrd::Units units_of(const Options& o) {
  return o.units == "bits" ? epsrd::Units::bits : epsrd::Units::nats;
}

// Writes to --output when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw config_error("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int cmd_bounds(const Options& o, bool grid_bounds_given) {
  epsrd::SweepConfig cfg;
  cfg.source = source_spec(o);
  cfg.epsilon = o.epsilon;
  cfg.grid.var = o.grid_var == "d" ? epsrd::GridVar::distortion : epsrd::GridVar::slope;
  cfg.grid.scale = o.grid_scale == "linear" ? epsrd::GridScale::linear : epsrd::GridScale::log;
  cfg.grid.count = o.grid_count;
  if (cfg.grid.var == epsrd::GridVar::distortion && !grid_bounds_given) {
    cfg.grid.min = 0.005;
    cfg.grid.max = 0.6;
  } else {
    cfg.grid.min = o.grid_min;
    cfg.grid.max = o.grid_max;
  }
  cfg.bounds = epsrd::parse_bound_list(o.bounds);
  cfg.ba = ba_settings(o);
  cfg.units = units_of(o);
  cfg.threads = thread_count(o);
  cfg.validate();
  const auto table = epsrd::convert_units(epsrd::compute_bounds(cfg), cfg.units);
  Sink sink(o.output);
  if (o.format == "json") {
    auto doc = epsrd::to_json(table);
    doc["source"] = cfg.source.describe();
    doc["epsilon"] = cfg.epsilon;
    sink.stream() << doc.dump(2) << '\n';
  } else {
    epsrd::write_csv(sink.stream(), table);
  }
  return kExitOk;
}

int cmd_dmax(const Options& o) {
  const auto spec = source_spec(o);
  const epsrd::Source src = spec.make();
  const epsrd::EpsilonLoss loss(o.epsilon);
  const double d_eps = epsrd::d_max(src, loss);
  const double d_zero = epsrd::d_max(src, epsrd::EpsilonLoss(0.0));
  Sink sink(o.output);
  double zero = std::nan("");
  std::string problem;
  try {
    zero = epsrd::slb_zero(src, loss);
  } catch (const epsrd::vacuous_bound_error& e) {
    problem = e.what();
  }
  // strict ordering for eps > 0; the first two coincide when eps = 0
  bool chain = problem.empty();
  if (chain) {
    chain = o.epsilon > 0.0 ? (zero < d_eps && d_eps < d_zero)
                            : (zero <= d_eps + 1e-8 && d_eps <= d_zero);
  }
  if (problem.empty() && !chain) problem = "ordering slb_zero < d_max(eps) < d_max(0) violated";
  if (o.format == "json") {
    nlohmann::json doc{{"source", spec.describe()},
                       {"epsilon", o.epsilon},
                       {"slb_zero", std::isfinite(zero) ? nlohmann::json(zero) : nlohmann::json(nullptr)},
                       {"d_max_eps", d_eps},
                       {"d_max_zero", d_zero},
                       {"ordered", chain},
                       {"problem", problem}};
    sink.stream() << doc.dump(2) << '\n';
  } else {
    auto& out = sink.stream();
    out << "quantity,value\n";
    out << "slb_zero," << (std::isfinite(zero) ? epsrd::format_number(zero) : "") << '\n';
    out << "d_max_eps," << epsrd::format_number(d_eps) << '\n';
    out << "d_max_zero," << epsrd::format_number(d_zero) << '\n';
    out << "ordered," << (chain ? "true" : "false") << '\n';
  }
  if (!problem.empty()) {
    std::cerr << "epsrd dmax: " << problem << '\n';
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_ba(const Options& o) {
  epsrd::GridSpec grid;
  grid.var = epsrd::GridVar::slope;
  grid.scale = o.grid_scale == "linear" ? epsrd::GridScale::linear : epsrd::GridScale::log;
  grid.min = o.grid_min;
  grid.max = o.grid_max;
  grid.count = o.grid_count;
  if (o.grid_var == "d") {
    throw config_error("ba sweeps slopes; use --grid-var s");
  }
  const auto slopes = grid.values();
  const auto settings = ba_settings(o);
  if (settings.n < 3 || settings.n % 2 == 0) throw config_error("ba-n must be odd and >= 3");
  if (!(settings.tol > 0.0)) throw config_error("ba-tol must be > 0");
  const epsrd::Source src = source_spec(o).make();
  const epsrd::EpsilonLoss loss(o.epsilon);
  const auto points = epsrd::ba_curve(src, loss, slopes, settings.n, settings.options(), thread_count(o));
  const auto units = units_of(o);
  Sink sink(o.output);
  if (o.format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : points) {
      nlohmann::json j{{"s", *p.point.s}, {"iterations", p.iterations}, {"converged", p.converged}};
      if (p.error.empty()) {
        j["D"] = p.point.d;
        j["R"] = epsrd::in_units(p.point.r, units);
        j["duality_gap"] = p.duality_gap;
      } else {
        j["error"] = p.error;
      }
      rows.push_back(std::move(j));
    }
    nlohmann::json doc{{"source", source_spec(o).describe()}, {"epsilon", o.epsilon},
                       {"units", std::string(epsrd::to_string(units))}, {"rows", rows}};
    sink.stream() << doc.dump(2) << '\n';
  } else {
    auto& out = sink.stream();
    out << "s,D,R,iterations,converged,duality_gap,error\n";
    for (const auto& p : points) {
      out << epsrd::format_number(*p.point.s) << ',';
      if (p.error.empty()) {
        out << epsrd::format_number(p.point.d) << ',' << epsrd::format_number(epsrd::in_units(p.point.r, units))
            << ',' << p.iterations << ',' << (p.converged ? "true" : "false") << ','
            << epsrd::format_number(p.duality_gap) << ",\n";
      } else {
        std::string msg = p.error;
        for (char& ch : msg) {
          if (ch == ',' || ch == '\n') ch = ' ';
        }
        out << ",,0,false,," << msg << '\n';
      }
    }
  }
  return kExitOk;
}

int cmd_verify(const Options& o, bool grid_bounds_given) {
  epsrd::VerifyConfig cfg;
  cfg.source = source_spec(o);
  cfg.epsilon = o.epsilon;
  cfg.ba = ba_settings(o);
  cfg.threads = thread_count(o);
  cfg.slope_count = o.grid_count;
  if (grid_bounds_given) {
    cfg.s_min = o.grid_min;
    cfg.s_max = o.grid_max;
  }
  if (cfg.ba.n < 3 || cfg.ba.n % 2 == 0) throw config_error("ba-n must be odd and >= 3");
  const auto report = epsrd::run_verify(cfg);
  for (const auto& c : report.checks) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << "  points=" << c.points
              << "  worst_slack=" << epsrd::format_number(c.worst_slack);
    if (!c.detail.empty()) std::cerr << "  [" << c.detail << "]";
    std::cerr << '\n';
  }
  Sink sink(o.output);
  sink.stream() << report.to_json().dump(2) << '\n';
  return report.passed() ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Rate-distortion bounds under the epsilon-insensitive loss"};
  app.set_config("--config", "", "key=value file with the long option names as keys; flags win");
  app.require_subcommand(1, 1);

  app.add_option("--source", o.source, "laplacian | gaussian | csv:PATH")->capture_default_str();
  app.add_option("--alpha", o.alpha, "Laplacian parameter alpha")->capture_default_str();
  app.add_option("--sigma2", o.sigma2, "Gaussian variance")->capture_default_str();
  app.add_option("--epsilon", o.epsilon, "insensitivity half-width eps >= 0")->capture_default_str();
  app.add_option("--grid-min", o.grid_min, "first grid value")->capture_default_str();
  app.add_option("--grid-max", o.grid_max, "last grid value")->capture_default_str();
  app.add_option("--grid-count", o.grid_count, "number of grid points")->capture_default_str();
  app.add_option("--grid-scale", o.grid_scale, "log | linear")
      ->check(CLI::IsMember({"log", "linear"}))
      ->capture_default_str();
  app.add_option("--grid-var", o.grid_var, "s (slope) | d (distortion)")
      ->check(CLI::IsMember({"s", "d"}))
      ->capture_default_str();
  app.add_option("--bounds", o.bounds, "comma list of slb,ru,rau,rge,trivial,ba or all")
      ->capture_default_str();
  app.add_option("--ba-n", o.ba_n, "BA grid points (odd)")->capture_default_str();
  app.add_option("--ba-tol", o.ba_tol, "BA sup-norm stopping tolerance")->capture_default_str();
  app.add_option("--ba-max-iter", o.ba_max_iter, "BA iteration cap")->capture_default_str();
  app.add_option("--ba-gap-tol", o.ba_gap_tol, "optional BA duality-gap stop (0 = off)")
      ->capture_default_str();
  app.add_option("--format", o.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--units", o.units, "nats | bits")
      ->check(CLI::IsMember({"nats", "bits"}))
      ->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (0 = machine parallelism)")->capture_default_str();
  app.add_option("--output", o.output, "output path (default stdout)");

  auto* bounds = app.add_subcommand("bounds", "sweep the selected bounds over a slope or distortion grid");
  auto* dmax = app.add_subcommand("dmax", "zero crossing of the SLB and D_max with and without eps");
  auto* ba = app.add_subcommand("ba", "Blahut-Arimoto points over a slope grid");
  auto* verify = app.add_subcommand("verify", "run the invariant checks; JSON summary");
  for (auto* sub : {bounds, dmax, ba, verify}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const bool grid_bounds_given = app.count("--grid-min") + app.count("--grid-max") > 0;
  try {
    if (*bounds) return cmd_bounds(o, grid_bounds_given);
    if (*dmax) return cmd_dmax(o);
    if (*ba) return cmd_ba(o);
    if (*verify) return cmd_verify(o, grid_bounds_given);
  } catch (const std::invalid_argument& e) {
    std::cerr << "epsrd: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "epsrd: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "epsrd: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitConfig;
}
