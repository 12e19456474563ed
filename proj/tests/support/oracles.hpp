#pragma once

// Test-only reference computations. These deliberately avoid the closed forms
// they are used to check.

#include <cmath>
#include <numbers>
#include <vector>

#include "epsrd/quadrature.hpp"

namespace epsrd::oracle {

/// Integral over the real line of a function that is smooth between the
/// breakpoints and decays at least like exp(-decay |x|) beyond [lo, hi].
/// The outer pieces extend 40 decay lengths past lo and hi.
template <class F>
double line_integral(F&& f, double lo, double hi, double decay, std::vector<double> breaks,
                     double max_width) {
  const double reach = 40.0 / decay;
  breaks.push_back(lo);
  breaks.push_back(hi);
  const auto pieces = quad::make_breaks(std::move(breaks), lo - reach, hi + reach);
  return quad::integrate_pieces(f, pieces, max_width);
}

/// Same, for the tilted density family: breakpoints at +-eps and panels no
/// wider than 4 / |s|.
template <class F>
double kernel_integral(F&& f, double s, double eps) {
  const double k = std::abs(s);
  return line_integral(f, -eps, eps, k, {-eps, 0.0, eps}, 4.0 / k);
}

/// Cosine transform int f(x) cos(w x) dx of an even function, by quadrature
/// with panels resolving both the oscillation and the given length scale.
template <class F>
double cosine_transform(F&& f, double omega, double lo, double hi, double decay,
                        std::vector<double> breaks, double scale) {
  double width = scale;
  if (omega != 0.0) width = std::min(width, std::numbers::pi / (2.0 * std::abs(omega)));
  return line_integral([&](double x) { return f(x) * std::cos(omega * x); }, lo, hi, decay,
                       std::move(breaks), width);
}

/// Upper-tail normal probability from the alternating Maclaurin series of
/// erf, summed in long double. Valid for moderate |x| (say |x| < 3).
inline double phi_c_series(double x) {
  long double sum = 0.0L;
  long double term = x;  // x^(2n+1) (-1/2)^n / n!
  for (int n = 0; n < 200; ++n) {
    sum += term / (2 * n + 1);
    term *= -static_cast<long double>(x) * x / (2.0L * (n + 1));
  }
  return static_cast<double>(0.5L - sum / std::sqrt(2.0L * std::numbers::pi_v<long double>));
}

inline std::vector<double> log_space(double a, double b, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out[i] = std::exp(std::log(a) + t * (std::log(b) - std::log(a)));
  }
  return out;
}

}  // namespace epsrd::oracle
