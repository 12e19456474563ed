#pragma once

// Characteristic functions of g_s and its factorization
//   G_s(w) = L_|s|(w) * M_|s|(w),
// where L is the Laplace(|s|) CF and M is the CF of the mixture of the point
// pair {-eps, +eps} (weight 1) and the uniform law on [-eps, eps] (weight
// eps|s|). Also the two certificates that the SLB is not attained for the
// Laplacian and Gaussian sources.
//
// Every density here is even, so all CFs are real cosine transforms.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "epsrd/epsilon_kernel.hpp"
#include "epsrd/quadrature.hpp"
#include "epsrd/sources.hpp"

namespace epsrd {

/// sin(t) / t with sinc(0) = 1; short Taylor series for |t| < 1e-4.
inline double sinc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

/// L_|s|(w) = s^2 / (s^2 + w^2).
inline double laplace_cf(double omega, double s) {
  detail::require_slope(s, "laplace_cf");
  return s * s / (s * s + omega * omega);
}

/// M_|s|(w) = (eps|s| sinc(w eps) + cos(w eps)) / (1 + eps|s|); identically 1
/// for eps = 0.
inline double mixture_cf(double omega, double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "mixture_cf");
  if (loss.is_absolute()) return 1.0;
  const double eps = loss.epsilon();
  const double ke = k * eps;
  return (ke * sinc(omega * eps) + std::cos(omega * eps)) / (1.0 + ke);
}

inline double g_cf(double omega, double s, const EpsilonLoss& loss) {
  return laplace_cf(omega, s) * mixture_cf(omega, s, loss);
}

/// Laplace(|s|) density l_|s|(x) = (|s| / 2) e^{-|s||x|}.
inline double laplace_density(double x, double s) {
  const double k = detail::require_slope(s, "laplace_density");
  return 0.5 * k * std::exp(-k * std::abs(x));
}

/// (l_|s| * m_|s|)(x): the point pair enters as shifted evaluations of l, the
/// uniform part by quadrature over [-eps, eps].
inline double laplace_mixture_convolution(double x, double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "laplace_mixture_convolution");
  if (loss.is_absolute()) return laplace_density(x, s);
  const double eps = loss.epsilon();
  const double ke = k * eps;
  const double point_pair = 0.5 * (laplace_density(x - eps, s) + laplace_density(x + eps, s));
  const double lo = -eps;
  const double hi = eps;
  const double kink = x;  // l(x - u) has its kink at u = x
  const auto uniform_part = [&](double u) { return laplace_density(x - u, s) / (2.0 * eps); };
  const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * eps * k / 8.0)));
  double smooth = 0.0;
  if (kink > lo && kink < hi) {
    smooth = quad::integrate(uniform_part, lo, kink, panels) + quad::integrate(uniform_part, kink, hi, panels);
  } else {
    smooth = quad::integrate(uniform_part, lo, hi, panels);
  }
  return (point_pair + ke * smooth) / (1.0 + ke);
}

/// Lower bound on |Q(w_k)| at w_k = (2k - 1/2) pi / eps for a Laplacian(alpha)
/// source, where Q is the CF a reproduction density would need for the SLB to
/// be attained at slope s (requires |s| > alpha). Exceeding 1 rules out every
/// valid Q.
inline double laplacian_witness(double alpha, double s, const EpsilonLoss& loss, std::int64_t k) {
  const double mag = detail::require_slope(s, "laplacian_witness");
  if (!(mag > alpha)) throw std::domain_error("witness requires |s| > alpha");
  if (loss.is_absolute()) throw std::domain_error("laplacian_witness: requires eps > 0");
  if (k < 1) throw std::domain_error("laplacian_witness: k must be >= 1");
  const double eps = loss.epsilon();
  const double ke = eps * mag;
  return alpha * alpha / (mag * mag) * (1.0 + ke) / ke * (2.0 * static_cast<double>(k) - 0.5) *
         std::numbers::pi;
}

/// Smallest k with laplacian_witness(k) > threshold.
inline std::int64_t smallest_witness_k(double alpha, double s, const EpsilonLoss& loss,
                                       double threshold = 1.0) {
  const double unit = laplacian_witness(alpha, s, loss, 1) / (1.5 * std::numbers::pi);
  // witness(k) = unit * (2k - 1/2) pi > threshold
  auto k = static_cast<std::int64_t>(std::ceil((threshold / (unit * std::numbers::pi) + 0.5) / 2.0));
  k = std::max<std::int64_t>(k, 1);
  while (k > 1 && laplacian_witness(alpha, s, loss, k - 1) > threshold) --k;
  while (laplacian_witness(alpha, s, loss, k) <= threshold) ++k;
  return k;
}

/// Inverse transform of P(w) / L_|s|(w) for the N(0, sigma2) source:
///   p(x) (1 + 1/(s^2 sigma^2) - x^2/(s^2 sigma^4)).
/// It turns negative for |x| > sigma sqrt(1 + s^2 sigma^2).
inline double gaussian_deconvolution_density(double x, double sigma2, double s) {
  detail::require_slope(s, "gaussian_deconvolution_density");
  const double s2 = s * s;
  return gaussian_density(x, sigma2) * (1.0 + 1.0 / (s2 * sigma2) - x * x / (s2 * sigma2 * sigma2));
}

/// |x| beyond which gaussian_deconvolution_density is negative.
inline double gaussian_deconvolution_sign_change(double sigma2, double s) {
  return std::sqrt(sigma2) * std::sqrt(1.0 + s * s * sigma2);
}

struct DeconvolutionMinimum {
  double x = 0.0;
  double value = 0.0;
};

/// Most negative value of gaussian_deconvolution_density, attained at
/// x^2 = s^2 sigma^4 + 3 sigma^2.
inline DeconvolutionMinimum gaussian_deconvolution_minimum(double sigma2, double s) {
  detail::require_slope(s, "gaussian_deconvolution_minimum");
  const double x = std::sqrt(s * s * sigma2 * sigma2 + 3.0 * sigma2);
  return {x, gaussian_deconvolution_density(x, sigma2, s)};
}

}  // namespace epsrd
