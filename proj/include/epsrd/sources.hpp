#pragma once

// Source densities (Laplacian, Gaussian, tabulated) and the per-source
// quantities the bounds need: h(p), variance and D_max for a given loss.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epsrd/epsilon_kernel.hpp"
#include "epsrd/quadrature.hpp"

namespace epsrd {

/// Upper-tail standard normal probability, Phi_c(x) = P(Z > x).
inline double erfc_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

struct Laplacian {
  double alpha = 1.0;
};

struct Gaussian {
  double sigma2 = 1.0;
  [[nodiscard]] double sigma() const { return std::sqrt(sigma2); }
};

/// Piecewise-constant density on a uniform grid: cell i is centred on grid[i]
/// with width spacing() and carries masses[i].
class Tabulated {
 public:
  static constexpr double kMassTolerance = 1e-9;

  Tabulated(std::vector<double> grid, std::vector<double> masses)
      : grid_(std::move(grid)), masses_(std::move(masses)) {
    if (grid_.size() < 2 || grid_.size() != masses_.size()) {
      throw std::invalid_argument("Tabulated: need >= 2 points and one mass per point");
    }
    spacing_ = (grid_.back() - grid_.front()) / static_cast<double>(grid_.size() - 1);
    if (!(spacing_ > 0.0)) throw std::invalid_argument("Tabulated: grid must be increasing");
    for (std::size_t i = 1; i < grid_.size(); ++i) {
      const double step = grid_[i] - grid_[i - 1];
      if (!(step > 0.0) || std::abs(step - spacing_) > 1e-6 * spacing_) {
        throw std::invalid_argument("Tabulated: grid must be strictly increasing and uniform");
      }
    }
    double total = 0.0;
    for (double m : masses_) {
      if (!(m >= 0.0) || !std::isfinite(m)) {
        throw std::invalid_argument("Tabulated: masses must be finite and >= 0");
      }
      total += m;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
      throw std::invalid_argument("Tabulated: masses must sum to 1");
    }
  }

  /// Discretizes a density onto n points over [lo, hi] (mass = density * spacing,
  /// renormalized).
  template <class Density>
  static Tabulated from_density(Density&& density, double lo, double hi, std::size_t n) {
    if (n < 2) throw std::invalid_argument("Tabulated::from_density: n must be >= 2");
    std::vector<double> x(n);
    std::vector<double> m(n);
    const double dx = (hi - lo) / static_cast<double>(n - 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = lo + dx * static_cast<double>(i);
      m[i] = density(x[i]) * dx;
      total += m[i];
    }
    for (double& v : m) v /= total;
    return Tabulated(std::move(x), std::move(m));
  }

  [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
  [[nodiscard]] const std::vector<double>& masses() const noexcept { return masses_; }
  [[nodiscard]] double spacing() const noexcept { return spacing_; }
  [[nodiscard]] std::size_t size() const noexcept { return grid_.size(); }

  /// Lower edge of the first cell and upper edge of the last.
  [[nodiscard]] double lower_edge() const noexcept { return grid_.front() - 0.5 * spacing_; }
  [[nodiscard]] double upper_edge() const noexcept { return grid_.back() + 0.5 * spacing_; }

 private:
  std::vector<double> grid_;
  std::vector<double> masses_;
  double spacing_ = 0.0;
};

class Source {
 public:
  using Kind = std::variant<Laplacian, Gaussian, Tabulated>;

  static Source laplacian(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      throw std::domain_error("Laplacian source: alpha must be > 0");
    }
    return Source(Laplacian{alpha});
  }

  static Source gaussian(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw std::domain_error("Gaussian source: sigma2 must be > 0");
    }
    return Source(Gaussian{sigma2});
  }

  static Source tabulated(Tabulated table) { return Source(std::move(table)); }

  [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

  [[nodiscard]] const Laplacian* as_laplacian() const { return std::get_if<Laplacian>(&kind_); }
  [[nodiscard]] const Gaussian* as_gaussian() const { return std::get_if<Gaussian>(&kind_); }
  [[nodiscard]] const Tabulated* as_tabulated() const { return std::get_if<Tabulated>(&kind_); }

  [[nodiscard]] std::string name() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Laplacian>) return "laplacian";
          else if constexpr (std::is_same_v<T, Gaussian>) return "gaussian";
          else return "tabulated";
        },
        kind_);
  }

 private:
  explicit Source(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

// Overload helper for std::visit.
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double gaussian_density(double x, double sigma2) {
  return std::exp(-0.5 * x * x / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

inline double pdf(const Source& src, double x) {
  return std::visit(
      overloaded{
          [x](const Laplacian& l) { return 0.5 * l.alpha * std::exp(-l.alpha * std::abs(x)); },
          [x](const Gaussian& g) { return gaussian_density(x, g.sigma2); },
          [x](const Tabulated& t) {
            if (x < t.lower_edge() || x >= t.upper_edge()) return 0.0;
            auto i = static_cast<std::size_t>(std::floor((x - t.lower_edge()) / t.spacing()));
            i = std::min(i, t.size() - 1);
            return t.masses()[i] / t.spacing();
          },
      },
      src.kind());
}

/// h(p) in nats. Zero-mass cells of a tabulated source contribute nothing.
inline double differential_entropy(const Source& src) {
  return std::visit(
      overloaded{
          [](const Laplacian& l) { return 1.0 - std::log(0.5 * l.alpha); },
          [](const Gaussian& g) {
            return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi * g.sigma2));
          },
          [](const Tabulated& t) {
            double h = 0.0;
            for (double m : t.masses()) {
              if (m > 0.0) h -= m * std::log(m / t.spacing());
            }
            return h;
          },
      },
      src.kind());
}

inline double mean(const Source& src) {
  if (const auto* t = src.as_tabulated()) {
    double mu = 0.0;
    for (std::size_t i = 0; i < t->size(); ++i) mu += t->masses()[i] * t->grid()[i];
    return mu;
  }
  return 0.0;
}

/// Variance v_p. For tabulated sources the within-cell spread Delta^2/12 of
/// the piecewise-constant density is included.
inline double variance(const Source& src) {
  return std::visit(
      overloaded{
          [](const Laplacian& l) { return 2.0 / (l.alpha * l.alpha); },
          [](const Gaussian& g) { return g.sigma2; },
          [&src](const Tabulated& t) {
            const double mu = mean(src);
            double v = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
              const double d = t.grid()[i] - mu;
              v += t.masses()[i] * d * d;
            }
            return v + t.spacing() * t.spacing() / 12.0;
          },
      },
      src.kind());
}

inline double std_dev(const Source& src) { return std::sqrt(variance(src)); }

/// Interval outside of which the density is below e^-40 of its peak (exactly
/// zero for tabulated sources).
inline std::pair<double, double> effective_support(const Source& src) {
  return std::visit(
      overloaded{
          [](const Laplacian& l) { return std::pair{-40.0 / l.alpha, 40.0 / l.alpha}; },
          [](const Gaussian& g) { return std::pair{-9.0 * g.sigma(), 9.0 * g.sigma()}; },
          [](const Tabulated& t) { return std::pair{t.lower_edge(), t.upper_edge()}; },
      },
      src.kind());
}

/// Points where the density is not smooth.
inline std::vector<double> density_breakpoints(const Source& src) {
  return std::visit(
      overloaded{
          [](const Laplacian&) { return std::vector<double>{0.0}; },
          [](const Gaussian&) { return std::vector<double>{}; },
          [](const Tabulated& t) {
            std::vector<double> edges(t.size() + 1);
            for (std::size_t i = 0; i <= t.size(); ++i) {
              edges[i] = t.lower_edge() + t.spacing() * static_cast<double>(i);
            }
            return edges;
          },
      },
      src.kind());
}

/// Probability mass outside [-half_width, half_width].
inline double tail_mass(const Source& src, double half_width) {
  return std::visit(
      overloaded{
          [=](const Laplacian& l) { return std::exp(-l.alpha * half_width); },
          [=](const Gaussian& g) { return 2.0 * erfc_tail(half_width / g.sigma()); },
          [=](const Tabulated& t) {
            double out = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
              if (std::abs(t.grid()[i]) > half_width) out += t.masses()[i];
            }
            return out;
          },
      },
      src.kind());
}

/// Smallest symmetric half-width whose tail mass is at most `tail`.
inline double required_half_width(const Source& src, double tail) {
  if (const auto* l = src.as_laplacian()) return std::log(1.0 / tail) / l->alpha;
  if (const auto* t = src.as_tabulated()) {
    return std::max(std::abs(t->grid().front()), std::abs(t->grid().back()));
  }
  const double sigma = src.as_gaussian()->sigma();
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14; ++i) {
    const double mid = 0.5 * (lo + hi);
    (2.0 * erfc_tail(mid) > tail ? lo : hi) = mid;
  }
  return hi * sigma;
}

/// E_p[rho_eps(X - y)]: quadrature for continuous sources, a point-mass sum
/// over the grid for tabulated ones.
inline double expected_loss(const Source& src, const EpsilonLoss& loss, double y) {
  if (const auto* t = src.as_tabulated()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < t->size(); ++i) sum += t->masses()[i] * loss(t->grid()[i] - y);
    return sum;
  }
  const auto [lo, hi] = effective_support(src);
  std::vector<double> pts = density_breakpoints(src);
  pts.push_back(y - loss.epsilon());
  pts.push_back(y + loss.epsilon());
  const auto breaks = quad::make_breaks(std::move(pts), lo + std::min(y, 0.0), hi + std::max(y, 0.0));
  const double width = 0.25 * std_dev(src);
  return quad::integrate_pieces([&](double x) { return loss(x - y) * pdf(src, x); }, breaks, width);
}

struct LossMinimum {
  double y = 0.0;
  double value = 0.0;
};

/// Golden-section search for inf_y E_p[rho_eps(X - y)], which is convex in y.
inline LossMinimum minimize_expected_loss(const Source& src, const EpsilonLoss& loss,
                                          double y_tol = 1e-10) {
  double a = 0.0;
  double b = 0.0;
  if (const auto* t = src.as_tabulated()) {
    a = t->grid().front();
    b = t->grid().back();
  } else {
    a = -4.0 * std_dev(src);
    b = 4.0 * std_dev(src);
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double y) { return expected_loss(src, loss, y); };
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > y_tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double y = 0.5 * (a + b);
  return {y, f(y)};
}

/// D_max = inf_y E_p[rho_eps(X - y)].
inline double d_max(const Source& src, const EpsilonLoss& loss) {
  const double eps = loss.epsilon();
  if (const auto* l = src.as_laplacian()) return std::exp(-l->alpha * eps) / l->alpha;
  if (const auto* g = src.as_gaussian()) {
    return 2.0 * (g->sigma2 * gaussian_density(eps, g->sigma2) - eps * erfc_tail(eps / g->sigma()));
  }
  return minimize_expected_loss(src, loss).value;
}

struct SourceSummary {
  double h_p = 0.0;
  double v_p = 0.0;
  double d_max_eps = 0.0;
  double d_max_zero = 0.0;
};

inline SourceSummary summarize(const Source& src, const EpsilonLoss& loss) {
  return {differential_entropy(src), variance(src), d_max(src, loss), d_max(src, EpsilonLoss{0.0})};
}

/// Reads a two-column (x, mass) CSV. A non-numeric first line is treated as a
/// header. Masses are renormalized when they sum to 1 within 1e-6.
inline Tabulated parse_tabulated_csv(std::istream& in) {
  std::vector<double> x;
  std::vector<double> m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
      line.erase(0, 3);
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("tabulated CSV line " + std::to_string(line_no) +
                                  ": expected two comma-separated columns");
    }
    const std::string a = line.substr(0, comma);
    const std::string b = line.substr(comma + 1);
    try {
      std::size_t pa = 0;
      std::size_t pb = 0;
      const double xv = std::stod(a, &pa);
      const double mv = std::stod(b, &pb);
      if (a.find_first_not_of(" \t", pa) != std::string::npos ||
          b.find_first_not_of(" \t", pb) != std::string::npos) {
        throw std::invalid_argument("trailing characters");
      }
      x.push_back(xv);
      m.push_back(mv);
    } catch (const std::exception&) {
      if (x.empty() && line_no == 1) continue;  // header
      throw std::invalid_argument("tabulated CSV line " + std::to_string(line_no) +
                                  ": malformed number");
    }
  }
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("tabulated CSV: masses sum to " + std::to_string(total) +
                                ", not 1 within 1e-6");
  }
  for (double& v : m) v /= total;
  return Tabulated(std::move(x), std::move(m));
}

inline Tabulated load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open tabulated CSV: " + path);
  return parse_tabulated_csv(in);
}

}  // namespace epsrd
