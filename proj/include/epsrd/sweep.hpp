#pragma once

// Bound sweeps over a slope or distortion grid. One row per grid point with
// the slope s, the distortion D and one rate column per bound; rates are kept
// in nats until a table is converted for display.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epsrd/ba_solver.hpp"
#include "epsrd/bounds.hpp"
#include "epsrd/parallel.hpp"
#include "epsrd/sources.hpp"

namespace epsrd {

enum class BoundKind : std::size_t { slb = 0, ru, rau, rge, trivial, ba };
inline constexpr std::size_t kBoundCount = 6;
inline constexpr std::array<std::string_view, kBoundCount> kBoundNames{"slb", "ru",      "rau",
                                                                       "rge", "trivial", "ba"};
inline constexpr std::array<std::string_view, kBoundCount> kRateColumns{
    "R_slb", "R_u", "R_au", "R_ge", "R_trivial", "R_ba"};

using BoundSet = std::array<bool, kBoundCount>;

inline constexpr std::size_t index_of(BoundKind b) { return static_cast<std::size_t>(b); }

enum class GridVar { slope, distortion };
enum class GridScale { log, linear };
enum class Units { nats, bits };

inline std::string_view to_string(Units u) { return u == Units::bits ? "bits" : "nats"; }

/// Rate in the requested unit (input in nats).
inline double in_units(double nats, Units u) {
  return u == Units::bits ? nats / std::numbers::ln2 : nats;
}

/// Shortest text that round-trips a value printed with 12 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// "slb,ru,..." or "all". Unknown names throw std::invalid_argument.
inline BoundSet parse_bound_list(std::string_view text) {
  BoundSet set{};
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string_view item = text.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "all") {
      set.fill(true);
    } else if (!item.empty()) {
      const auto it = std::find(kBoundNames.begin(), kBoundNames.end(), item);
      if (it == kBoundNames.end()) {
        throw std::invalid_argument("unknown bound '" + std::string(item) +
                                    "' (expected slb, ru, rau, rge, trivial, ba or all)");
      }
      set[static_cast<std::size_t>(it - kBoundNames.begin())] = true;
    }
    start = comma + 1;
  }
  return set;
}

struct SourceSpec {
  std::string kind = "laplacian";  // laplacian | gaussian | csv
  double alpha = std::numbers::sqrt2;
  double sigma2 = 1.0;
  std::string csv_path;

  /// Sets kind (and path) from "laplacian", "gaussian" or "csv:PATH".
  void set_kind(std::string_view text) {
    if (text == "laplacian" || text == "gaussian") {
      kind = std::string(text);
    } else if (text.substr(0, 4) == "csv:" && text.size() > 4) {
      kind = "csv";
      csv_path = std::string(text.substr(4));
    } else {
      throw std::invalid_argument("unknown source '" + std::string(text) +
                                  "' (expected laplacian, gaussian or csv:PATH)");
    }
  }

  [[nodiscard]] Source make() const {
    if (kind == "laplacian") return Source::laplacian(alpha);
    if (kind == "gaussian") return Source::gaussian(sigma2);
    if (kind == "csv") return Source::tabulated(load_tabulated_csv(csv_path));
    throw std::invalid_argument("unknown source kind '" + kind + "'");
  }

  [[nodiscard]] std::string describe() const {
    if (kind == "laplacian") return "laplacian(alpha=" + format_number(alpha) + ")";
    if (kind == "gaussian") return "gaussian(sigma2=" + format_number(sigma2) + ")";
    return "csv(" + csv_path + ")";
  }
};

struct GridSpec {
  GridVar var = GridVar::slope;
  GridScale scale = GridScale::log;
  double min = -200.0;
  double max = -0.5;
  std::size_t count = 20;

  /// Grid values from min to max. Slopes must be negative, distortions
  /// positive; a single point uses min.
  [[nodiscard]] std::vector<double> values() const {
    if (count < 1) throw std::invalid_argument("grid count must be >= 1");
    if (!std::isfinite(min) || !std::isfinite(max)) {
      throw std::invalid_argument("grid bounds must be finite");
    }
    if (var == GridVar::slope && !(min < 0.0 && max < 0.0)) {
      throw std::invalid_argument("slope grid bounds must be < 0");
    }
    if (var == GridVar::distortion && !(min > 0.0 && max > 0.0)) {
      throw std::invalid_argument("distortion grid bounds must be > 0");
    }
    std::vector<double> out(count);
    if (count == 1) {
      out[0] = min;
      return out;
    }
    for (std::size_t k = 0; k < count; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(count - 1);
      if (scale == GridScale::linear) {
        out[k] = min + t * (max - min);
      } else {
        const double sign = min < 0.0 ? -1.0 : 1.0;
        const double a = std::log(std::abs(min));
        const double b = std::log(std::abs(max));
        out[k] = sign * std::exp(a + t * (b - a));
      }
    }
    out.front() = min;
    out.back() = max;
    return out;
  }
};

struct BASettings {
  std::size_t n = 2001;
  double tol = 1e-10;
  std::size_t max_iter = 200000;
  double gap_tol = 0.0;

  [[nodiscard]] BAOptions options() const { return BAOptions{tol, max_iter, false, gap_tol}; }
};

struct SweepConfig {
  SourceSpec source;
  double epsilon = 0.1;
  GridSpec grid;
  BoundSet bounds{true, true, true, true, true, false};
  BASettings ba;
  Units units = Units::nats;
  unsigned threads = default_thread_count();

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("epsilon must be finite and >= 0");
    }
    if (std::none_of(bounds.begin(), bounds.end(), [](bool b) { return b; })) {
      throw std::invalid_argument("select at least one bound");
    }
    if (grid.count < 1) throw std::invalid_argument("grid count must be >= 1");
    if (bounds[index_of(BoundKind::ba)] || (bounds[index_of(BoundKind::trivial)] && source.kind != "laplacian")) {
      if (ba.n < 3 || ba.n % 2 == 0) throw std::invalid_argument("ba-n must be odd and >= 3");
      if (!(ba.tol > 0.0)) throw std::invalid_argument("ba-tol must be > 0");
    }
  }
};

struct CurveRow {
  double s = 0.0;
  double d = 0.0;
  std::array<std::optional<double>, kBoundCount> rate{};
  // unclamped value of a rate that was clamped at zero
  std::array<std::optional<double>, kBoundCount> raw{};
  std::vector<std::string> flags;

  bool operator==(const CurveRow&) const = default;
};

struct CurveTable {
  Units units = Units::nats;
  std::vector<CurveRow> rows;

  bool operator==(const CurveTable&) const = default;
};

/// Copy of a nats table expressed in `units`.
inline CurveTable convert_units(const CurveTable& table, Units units) {
  if (table.units == units) return table;
  CurveTable out = table;
  out.units = units;
  const auto convert = [units](double v) {
    return units == Units::bits ? v / std::numbers::ln2 : v * std::numbers::ln2;
  };
  for (auto& row : out.rows) {
    for (auto& v : row.rate) {
      if (v) *v = convert(*v);
    }
    for (auto& v : row.raw) {
      if (v) *v = convert(*v);
    }
  }
  return out;
}

/// Piecewise-linear view of a BA curve: chords between computed points, zero
/// beyond D_max, and the tangent line (slope s of the first point) below the
/// smallest computed distortion.
class BACurveInterpolant {
 public:
  struct Value {
    double r = 0.0;
    bool extrapolated = false;
    bool unconverged = false;
  };

  BACurveInterpolant(const std::vector<BACurvePoint>& points, double d_max) : d_max_(d_max) {
    for (const auto& p : points) {
      if (!p.error.empty() || !std::isfinite(p.point.d)) continue;
      if (!pts_.empty() && p.point.d <= pts_.back().point.d) continue;  // keep the first of equal D
      pts_.push_back(p);
    }
  }

  [[nodiscard]] bool empty() const { return pts_.empty(); }

  [[nodiscard]] Value at(double d) const {
    if (d >= d_max_) return {0.0, false, false};
    const auto& first = pts_.front();
    if (d < first.point.d) {
      const double r = first.point.r + first.point.s.value() * (d - first.point.d);
      return {r, true, !first.converged};
    }
    for (std::size_t k = 0; k + 1 < pts_.size(); ++k) {
      const auto& a = pts_[k];
      const auto& b = pts_[k + 1];
      if (d <= b.point.d) {
        const double t = (d - a.point.d) / (b.point.d - a.point.d);
        return {a.point.r + t * (b.point.r - a.point.r), false, !(a.converged && b.converged)};
      }
    }
    // between the last point and D_max: chord to (D_max, 0)
    const auto& last = pts_.back();
    const double t = (d - last.point.d) / (d_max_ - last.point.d);
    return {last.point.r * (1.0 - t), false, !last.converged};
  }

 private:
  std::vector<BACurvePoint> pts_;
  double d_max_;
};

namespace detail {

inline void put_rate(CurveRow& row, BoundKind b, const RDPoint& p) {
  row.rate[index_of(b)] = p.r;
  if (p.clamped) row.raw[index_of(b)] = p.raw_r;
}

inline std::string flag(BoundKind b, std::string_view what) {
  return std::string(kBoundNames[index_of(b)]) + "_" + std::string(what);
}

inline void fill_from_ba(std::vector<CurveRow>& rows, BoundKind b, const BACurveInterpolant& curve) {
  for (auto& row : rows) {
    if (curve.empty()) {
      row.flags.push_back(flag(b, "unavailable"));
      continue;
    }
    const auto v = curve.at(row.d);
    row.rate[index_of(b)] = std::max(v.r, 0.0);
    if (v.r < 0.0) row.raw[index_of(b)] = v.r;
    if (v.extrapolated) row.flags.push_back(flag(b, "extrapolated"));
    if (v.unconverged) row.flags.push_back(flag(b, "unconverged"));
  }
}

// The BA grid cannot represent the kernel at these slopes; values are
// reported but not trusted.
inline void flag_unresolved(std::vector<CurveRow>& rows, BoundKind b, const std::vector<double>& slopes,
                            double cap) {
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (-slopes[k] > cap) rows[k].flags.push_back(flag(b, "unresolved"));
  }
}

}  // namespace detail

/// Evaluates the selected bounds on the configured grid. Rows are sorted by D
/// ascending; rates are in nats.
inline CurveTable compute_bounds(const SweepConfig& cfg) {
  cfg.validate();
  const Source src = cfg.source.make();
  const EpsilonLoss loss(cfg.epsilon);
  const auto grid = cfg.grid.values();
  const auto selected = [&](BoundKind b) { return cfg.bounds[index_of(b)]; };
  const Laplacian* lap = src.as_laplacian();
  const double h_p = differential_entropy(src);

  CurveTable table;
  table.rows.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CurveRow& row = table.rows[k];
    if (cfg.grid.var == GridVar::slope) {
      row.s = grid[k];
      row.d = distortion_of_slope(row.s, loss);
    } else {
      row.d = grid[k];
      row.s = slope_of_distortion(row.d, loss);
    }
  }

  parallel_for(table.rows.size(), cfg.threads, [&](std::size_t k) {
    CurveRow& row = table.rows[k];
    const double s = row.s;
    const auto guarded = [&](BoundKind b, auto&& compute) {
      try {
        compute();
      } catch (const std::exception&) {
        row.rate[index_of(b)].reset();
        row.flags.push_back(detail::flag(b, "error"));
      }
    };
    if (selected(BoundKind::slb)) {
      guarded(BoundKind::slb, [&] {
        detail::put_rate(row, BoundKind::slb, RDPoint::clamped_rate(row.d, slb(row.d, h_p, loss), s));
      });
    }
    if (selected(BoundKind::ru)) {
      guarded(BoundKind::ru, [&] {
        detail::put_rate(row, BoundKind::ru, r_u(src, s, loss));
        if (lap && near_laplacian_singularity(s, lap->alpha)) {
          row.flags.push_back(detail::flag(BoundKind::ru, "numeric_convolution"));
        }
      });
    }
    if (selected(BoundKind::rau)) {
      if (!lap) {
        row.flags.push_back(detail::flag(BoundKind::rau, "inapplicable"));
      } else if (near_laplacian_singularity(s, lap->alpha)) {
        row.flags.push_back(detail::flag(BoundKind::rau, "singular"));
      } else {
        guarded(BoundKind::rau, [&] {
          detail::put_rate(row, BoundKind::rau, analytic_upper_laplacian(s, lap->alpha, loss));
        });
      }
    }
    if (selected(BoundKind::rge)) {
      guarded(BoundKind::rge, [&] {
        detail::put_rate(row, BoundKind::rge, gaussian_entropy_bound(src, s, loss));
      });
    }
    if (selected(BoundKind::trivial) && lap) {
      row.rate[index_of(BoundKind::trivial)] = trivial_bound_laplacian(row.d, lap->alpha);
    }
  });

  if (selected(BoundKind::ba)) {
    std::vector<double> slopes(table.rows.size());
    for (std::size_t k = 0; k < slopes.size(); ++k) slopes[k] = table.rows[k].s;
    const auto points = ba_curve(src, loss, slopes, cfg.ba.n, cfg.ba.options(), cfg.threads);
    detail::fill_from_ba(table.rows, BoundKind::ba, BACurveInterpolant(points, d_max(src, loss)));
    detail::flag_unresolved(table.rows, BoundKind::ba, slopes,
                            max_resolved_slope(ba_grid_spacing(src, loss, cfg.ba.n), loss));
  }
  if (selected(BoundKind::trivial) && !lap) {
    // eps = 0 rate-distortion function, computed by BA at slopes -1/D
    const EpsilonLoss absolute(0.0);
    std::vector<double> slopes(table.rows.size());
    for (std::size_t k = 0; k < slopes.size(); ++k) slopes[k] = -1.0 / table.rows[k].d;
    const auto points = ba_curve(src, absolute, slopes, cfg.ba.n, cfg.ba.options(), cfg.threads);
    detail::fill_from_ba(table.rows, BoundKind::trivial, BACurveInterpolant(points, d_max(src, absolute)));
    detail::flag_unresolved(table.rows, BoundKind::trivial, slopes,
                            max_resolved_slope(ba_grid_spacing(src, absolute, cfg.ba.n), absolute));
    for (auto& row : table.rows) row.flags.push_back(detail::flag(BoundKind::trivial, "from_ba"));
  }

  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const CurveRow& a, const CurveRow& b) { return a.d < b.d; });
  return table;
}

}  // namespace epsrd
