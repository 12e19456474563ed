#pragma once

// Cross-module invariant checks for one source and loss: closed-form
// identities, bound orderings, CF consistency and the BA sandwich. Each check
// reports its worst slack (allowed minus measured; negative means violated).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "epsrd/ba_solver.hpp"
#include "epsrd/bounds.hpp"
#include "epsrd/spectral.hpp"
#include "epsrd/sweep.hpp"

namespace epsrd {

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t points = 0;
  std::string detail;

  explicit CheckResult(std::string check_name) : name(std::move(check_name)) {}

  /// Records one comparison measured <= allowed.
  void record(double measured, double allowed, const std::string& where = {}) {
    ++points;
    const double slack = allowed - measured;
    if (!(slack >= worst_slack)) {
      worst_slack = slack;
      if (!(slack >= 0.0)) detail = where;
    }
    if (!(slack >= 0.0)) passed = false;
  }

  void fail(std::string why) {
    passed = false;
    detail = std::move(why);
  }
};

struct VerifyReport {
  std::string source;
  double epsilon = 0.0;
  std::vector<double> slopes;
  std::vector<CheckResult> checks;

  [[nodiscard]] bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : checks) {
      list.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"points", c.points},
                      {"worst_slack", std::isfinite(c.worst_slack) ? nlohmann::json(c.worst_slack)
                                                                   : nlohmann::json(nullptr)},
                      {"detail", c.detail}});
    }
    return {{"source", source}, {"epsilon", epsilon}, {"slopes", slopes}, {"passed", passed()},
            {"checks", std::move(list)}};
  }
};

struct VerifyConfig {
  SourceSpec source;
  double epsilon = 0.1;
  BASettings ba;
  std::size_t slope_count = 20;
  double s_min = -200.0;
  double s_max = -0.5;
  unsigned threads = default_thread_count();
};

namespace detail {

inline std::string at_s(double s) { return "s=" + format_number(s); }

}  // namespace detail

inline VerifyReport run_verify(const VerifyConfig& cfg) {
  const Source src = cfg.source.make();
  const EpsilonLoss loss(cfg.epsilon);
  const Laplacian* lap = src.as_laplacian();
  const double h_p = differential_entropy(src);

  VerifyReport report;
  report.source = cfg.source.describe();
  report.epsilon = cfg.epsilon;

  const double spacing = ba_grid_spacing(src, loss, cfg.ba.n);
  const double s_cap = max_resolved_slope(spacing, loss);
  GridSpec grid{GridVar::slope, GridScale::log, std::max(cfg.s_min, -s_cap), cfg.s_max, cfg.slope_count};
  if (!(grid.min < grid.max)) grid.min = grid.max;
  report.slopes = grid.values();
  const auto& slopes = report.slopes;

  {
    CheckResult c("two_route_slb");
    for (int k = 0; k < 50; ++k) {
      const double d = std::exp(std::log(1e-4) + k * (std::log(1e2) - std::log(1e-4)) / 49.0);
      const double parametric = h_p - g_entropy(slope_of_distortion(d, loss), loss);
      c.record(std::abs(slb(d, h_p, loss) - parametric), 1e-12, "D=" + format_number(d));
    }
    report.checks.push_back(c);
  }

  {
    CheckResult c("dominance");
    for (double s : slopes) {
      const auto ru = r_u(src, s, loss);
      c.record(ru.raw_r - gaussian_entropy_bound(src, s, loss).raw_r, 1e-9, detail::at_s(s) + " r_u vs R_GE");
      if (lap && !near_laplacian_singularity(s, lap->alpha)) {
        c.record(ru.raw_r - analytic_upper_laplacian(s, lap->alpha, loss).raw_r, 1e-9,
                 detail::at_s(s) + " r_u vs R_AU");
      }
    }
    report.checks.push_back(c);
  }

  if (lap) {
    CheckResult c("trivial_dominance");
    for (int k = 0; k < 60; ++k) {
      const double d = std::exp(std::log(1e-4) + k * (std::log(1.0 / lap->alpha) - std::log(1e-4)) / 59.0);
      c.record(slb(d, h_p, loss) - trivial_bound_laplacian(d, lap->alpha), 1e-12, "D=" + format_number(d));
    }
    report.checks.push_back(c);
  }

  {
    CheckResult c("cf_consistency");
    for (double s : {-1.0, -5.0, -20.0}) {
      const double k = -s;
      const double eps = loss.epsilon();
      for (double w : {0.0, 0.5, 2.0, 10.0, 50.0, 200.0}) {
        const double width = std::min(2.0 / k, w > 0.0 ? std::numbers::pi / (2.0 * w) : 2.0 / k);
        std::vector<double> pts{-eps, 0.0, eps};
        const auto breaks = quad::make_breaks(pts, -eps - 40.0 / k, eps + 40.0 / k);
        const double ft = quad::integrate_pieces(
            [&](double x) { return g_pdf(x, s, loss) * std::cos(w * x); }, breaks, width);
        const double g = g_cf(w, s, loss);
        c.record(std::abs(g - ft), 1e-7, detail::at_s(s) + " w=" + format_number(w));
        c.record(std::abs(g), 1.0, detail::at_s(s) + " |G| <= 1");
      }
    }
    report.checks.push_back(c);
  }

  const BAOptions opt = cfg.ba.options();
  const auto curve = ba_curve(src, loss, slopes, cfg.ba.n, opt, cfg.threads);
  {
    CheckResult c("sandwich");
    for (const auto& p : curve) {
      if (!p.error.empty()) {
        c.fail(detail::at_s(*p.point.s) + ": " + p.error);
        continue;
      }
      const double d = p.point.d;
      const std::string where = detail::at_s(*p.point.s);
      c.record(slb(d, h_p, loss) - p.point.r, 2e-2, where + " slb vs BA");
      c.record(p.point.r - r_u(src, slope_of_distortion(d, loss), loss).r, 2e-2, where + " BA vs r_u");
    }
    report.checks.push_back(c);
  }

  if (lap && loss.is_absolute()) {
    CheckResult c("exact_curve");
    for (const auto& p : curve) {
      if (!p.error.empty() || *p.point.s < -20.0 || *p.point.s > -2.0) continue;
      c.record(std::abs(p.point.r + std::log(lap->alpha * p.point.d)), 2e-2, detail::at_s(*p.point.s));
    }
    if (c.points == 0) c.fail("no BA point with s in [-20, -2]");
    report.checks.push_back(c);
  }

  if (!src.as_tabulated()) {
    CheckResult c("grid_convergence");
    const std::size_t coarse_n = std::max<std::size_t>(3, (cfg.ba.n / 2) | 1);
    // also require the decay length 1/|s| to cover a coarse cell, otherwise
    // the two grids measure discretization error, not convergence
    const double coarse_spacing = ba_grid_spacing(src, loss, coarse_n);
    const double coarse_cap = std::min(max_resolved_slope(coarse_spacing, loss), 1.0 / coarse_spacing);
    std::vector<double> resolved;
    for (double s : slopes) {
      if (-s <= coarse_cap) resolved.push_back(s);
    }
    if (resolved.empty()) {
      c.fail("no slope resolved by the n=" + std::to_string(coarse_n) + " grid");
    } else {
      const auto coarse = ba_curve(src, loss, resolved, coarse_n, opt, cfg.threads);
      for (const auto& q : coarse) {
        const auto fine = std::find_if(curve.begin(), curve.end(),
                                       [&](const BACurvePoint& p) { return *p.point.s == *q.point.s; });
        if (!q.error.empty() || fine == curve.end() || !fine->error.empty()) {
          c.fail(detail::at_s(*q.point.s) + ": BA point unavailable");
          continue;
        }
        const std::string where = detail::at_s(*q.point.s);
        c.record(std::abs(q.point.d - fine->point.d), 5e-3, where + " D");
        c.record(std::abs(q.point.r - fine->point.r), 5e-3, where + " R");
      }
    }
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace epsrd
