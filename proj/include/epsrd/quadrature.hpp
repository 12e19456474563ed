#pragma once

// Composite and adaptive Gauss-Legendre quadrature on finite intervals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace epsrd::quad {

template <std::size_t N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};
};

namespace detail {

// Newton iteration on P_N from the Tricomi initial guess; symmetric nodes are
// mirrored so the rule is exactly even.
template <std::size_t N>
GaussLegendreRule<N> make_rule() {
  GaussLegendreRule<N> rule;
  const std::size_t half = (N + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(N) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= N; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[N - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[N - 1 - i] = w;
  }
  if (N % 2 == 1) rule.nodes[N / 2] = 0.0;
  return rule;
}

}  // namespace detail

inline const GaussLegendreRule<64>& gauss_legendre_64() {
  static const GaussLegendreRule<64> rule = detail::make_rule<64>();
  return rule;
}

/// Single 64-node Gauss-Legendre panel on [a, b].
template <class F>
double gl64(F&& f, double a, double b) {
  const auto& rule = gauss_legendre_64();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return half * sum;
}

/// Composite rule: [a, b] split into `panels` equal 64-node panels.
template <class F>
double integrate(F&& f, double a, double b, int panels = 1) {
  if (panels < 1) throw std::invalid_argument("integrate: panels must be >= 1");
  if (a == b) return 0.0;
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double lo = a + h * k;
    const double hi = (k + 1 == panels) ? b : a + h * (k + 1);
    sum += gl64(f, lo, hi);
  }
  return sum;
}

/// Integrates over consecutive pieces [breaks[k], breaks[k+1]]; each piece is
/// cut into panels no wider than `max_panel_width`. Breakpoints must be sorted.
template <class F>
double integrate_pieces(F&& f, std::span<const double> breaks, double max_panel_width) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    if (!(b > a)) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / max_panel_width)));
    sum += integrate(f, a, b, panels);
  }
  return sum;
}

namespace detail {

template <class F>
double adaptive_step(F& f, double a, double b, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = gl64(f, a, mid);
  const double right = gl64(f, mid, b);
  const double both = left + right;
  if (depth <= 0 || std::abs(both - whole) <= std::max(tol, 1e-15 * std::abs(both))) {
    return both;
  }
  return adaptive_step(f, a, mid, left, 0.5 * tol, depth - 1) +
         adaptive_step(f, mid, b, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive bisection driven by the difference between one 64-node panel and
/// its two halves. `abs_tol` is the total absolute tolerance on [a, b].
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol, int max_depth = 40) {
  if (a == b) return 0.0;
  const double whole = gl64(f, a, b);
  return detail::adaptive_step(f, a, b, whole, abs_tol, max_depth);
}

/// Adaptive integration across sorted breakpoints; the tolerance is shared
/// equally between pieces.
template <class F>
double integrate_adaptive_pieces(F&& f, std::span<const double> breaks, double abs_tol,
                                 int max_depth = 40) {
  if (breaks.size() < 2) return 0.0;
  const double piece_tol = abs_tol / static_cast<double>(breaks.size() - 1);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (!(breaks[k + 1] > breaks[k])) continue;
    sum += integrate_adaptive(f, breaks[k], breaks[k + 1], piece_tol, max_depth);
  }
  return sum;
}

/// Sorts, clips to [lo, hi], and de-duplicates a breakpoint list.
inline std::vector<double> make_breaks(std::vector<double> points, double lo, double hi) {
  std::vector<double> out{lo};
  std::sort(points.begin(), points.end());
  for (double p : points) {
    if (p > out.back() && p < hi) out.push_back(p);
  }
  out.push_back(hi);
  return out;
}

}  // namespace epsrd::quad
