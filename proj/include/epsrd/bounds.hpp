#pragma once

// Lower and upper bounds on the rate-distortion function under the
// epsilon-insensitive loss. All bounds are parametrized by the slope s < 0
// through D_s = distortion_of_slope(s); rates are in nats.
//
//   slb    h(p) - h(g_s)                      (lower bound, any source)
//   r_u    h(g_s * p) - h(g_s)                (upper bound, test channel g_s)
//   r_ge   1/2 log(2 pi e (v_p + v_s)) - h(g_s)  (upper bound on r_u)
//   r_au   closed-form upper bound on r_u for the Laplacian source
//
// Analytic expressions that go negative are clamped to zero and flagged in the
// returned RDPoint.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "epsrd/epsilon_kernel.hpp"
#include "epsrd/quadrature.hpp"
#include "epsrd/rd_point.hpp"
#include "epsrd/sources.hpp"

namespace epsrd {

/// Raised when a Laplacian closed form is evaluated at |s| = alpha, where its
/// coefficients have a removable 0/0.
class singular_slope_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class vacuous_bound_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative window around |s| = alpha inside which the Laplacian closed forms
/// are not evaluated.
inline constexpr double kSingularWindow = 1e-6;

inline bool near_laplacian_singularity(double s, double alpha) {
  return std::abs(std::abs(s) - alpha) / alpha < kSingularWindow;
}

// ---------------------------------------------------------------------------
// Shannon lower bound

/// SLB as an explicit function of D. For eps > 0, with t = D / (2 eps):
///   h_p - log(2 eps) - log(1 + t + sqrt(t^2 + 2t)) + t - sqrt(t^2 + 2t),
/// and h_p - log(2 e D) for eps = 0.
inline double slb(double d, double h_p, const EpsilonLoss& loss) {
  if (!(d > 0.0)) throw std::domain_error("slb: D must be > 0");
  if (loss.is_absolute()) return h_p - std::log(2.0 * d) - 1.0;
  const double eps = loss.epsilon();
  const double t = d / (2.0 * eps);
  const double root = std::sqrt(t * t + 2.0 * t);
  // t - root, rewritten without cancellation
  const double diff = -2.0 * t / (t + root);
  return h_p - std::log(2.0 * eps) - std::log1p(t + root) + diff;
}

inline double slb(double d, const Source& src, const EpsilonLoss& loss) {
  return slb(d, differential_entropy(src), loss);
}

/// Distortion where the SLB reaches zero, by bisection on (0, D_max].
inline double slb_zero(const Source& src, const EpsilonLoss& loss, double tol = 1e-8) {
  const double h_p = differential_entropy(src);
  double hi = d_max(src, loss);
  if (!(hi > 0.0)) throw vacuous_bound_error("SLB vacuous: D_max is zero");
  const double at_hi = slb(hi, h_p, loss);
  // For eps = 0 the Laplacian SLB vanishes exactly at D_max; allow roundoff.
  if (at_hi > 1e-12) throw vacuous_bound_error("slb_zero: SLB is still positive at D_max");
  if (at_hi >= 0.0) return hi;
  double lo = hi * 1e-12;
  while (slb(lo, h_p, loss) <= 0.0) {
    lo *= 1e-12;
    if (lo < std::numeric_limits<double>::min()) {
      throw vacuous_bound_error("SLB vacuous: negative on the whole bracket (0, D_max]");
    }
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (slb(mid, h_p, loss) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// SLB of a Laplacian(alpha) source evaluated at s = -alpha, where the
/// Laplacian coincidence argument stops applying. Never positive.
inline double slb_strictness_smalls_laplacian(double alpha, const EpsilonLoss& loss) {
  const double x = alpha * loss.epsilon();
  // 1 - log(1 + x) - 1 / (1 + x)
  return x / (1.0 + x) - std::log1p(x);
}

// ---------------------------------------------------------------------------
// Trivial bound (Laplacian, eps = 0 rate-distortion function)

inline double trivial_bound_laplacian(double d, double alpha) {
  if (!(d > 0.0)) throw std::domain_error("trivial_bound_laplacian: D must be > 0");
  if (d >= 1.0 / alpha) return 0.0;
  return -std::log(alpha * d);
}

// ---------------------------------------------------------------------------
// Laplacian closed forms for r_s = g_s * p

struct LaplacianAuxiliaries {
  double c_s = 0.0;    // lower bound of a_s on (-eps, eps)
  double b_int = 0.0;  // integral of b_s over [eps, inf)
  double e_int = 0.0;  // integral of y b_s(y) over [eps, inf)
};

inline LaplacianAuxiliaries laplacian_auxiliaries(double s, double alpha, const EpsilonLoss& loss) {
  detail::require_slope(s, "laplacian_auxiliaries");
  if (near_laplacian_singularity(s, alpha)) {
    throw singular_slope_error("slope at removable singularity |s| = alpha");
  }
  const double eps = loss.epsilon();
  const double ae = alpha * eps;
  const double lead = s / (alpha - s);
  const double decay2 = std::exp(-2.0 * ae);
  const double a2 = alpha * alpha;
  const double s2 = s * s;
  LaplacianAuxiliaries aux;
  aux.c_s = 2.0 + 2.0 * lead * std::exp(-ae) * std::cosh(ae);
  aux.b_int = lead / alpha * decay2 + (s2 * (alpha - s) - 2.0 * a2 * alpha) / ((a2 - s2) * s * alpha);
  aux.e_int = lead * (1.0 + ae) / a2 * decay2 + s / (s + alpha) * (1.0 + ae) / a2 +
              2.0 * a2 / (a2 - s2) * (1.0 - s * eps) / s2;
  return aux;
}

/// Closed-form density of g_s * l_alpha.
inline double r_s_pdf_laplacian(double y, double s, double alpha, const EpsilonLoss& loss) {
  detail::require_slope(s, "r_s_pdf_laplacian");
  if (near_laplacian_singularity(s, alpha)) {
    throw singular_slope_error("slope at removable singularity |s| = alpha");
  }
  const double eps = loss.epsilon();
  const double c = normalizer(s, loss);
  const double lead = s / (alpha - s);
  const double u = std::abs(y);
  if (u < eps) {
    const double a = lead * std::exp(-alpha * (u + eps)) + lead * std::exp(alpha * (u - eps)) + 2.0;
    return a / (2.0 * c);
  }
  const double b = lead * std::exp(-alpha * (u + eps)) + s / (alpha + s) * std::exp(-alpha * (u - eps)) +
                   2.0 * alpha * alpha / (alpha * alpha - s * s) * std::exp(s * (u - eps));
  return b / (2.0 * c);
}

// ---------------------------------------------------------------------------
// Numeric convolution and h(r_s)

struct EntropyQuadrature {
  double abs_tol = 1e-10;
  // Inner convolution panels are no wider than this fraction of min(1/|s|, sd).
  double inner_panel_scale = 0.25;
  int max_depth = 30;
};

/// (g_s * p)(y) by quadrature over x; exact cell integrals for tabulated
/// sources.
inline double convolved_density(const Source& src, double s, const EpsilonLoss& loss, double y,
                                const EntropyQuadrature& opt = {}) {
  const double k = detail::require_slope(s, "convolved_density");
  const double eps = loss.epsilon();
  if (const auto* t = src.as_tabulated()) {
    double sum = 0.0;
    const double h = t->spacing();
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double m = t->masses()[i];
      if (m == 0.0) continue;
      const double a = t->grid()[i] - 0.5 * h;
      sum += m / h * g_mass(y - a - h, y - a, s, loss);
    }
    return sum;
  }
  const double tail = 40.0 / k;
  const auto [lo, hi] = effective_support(src);
  const double a = std::max(lo, y - eps - tail);
  const double b = std::min(hi, y + eps + tail);
  if (!(b > a)) return 0.0;
  std::vector<double> pts = density_breakpoints(src);
  pts.push_back(y - eps);
  pts.push_back(y + eps);
  const auto breaks = quad::make_breaks(std::move(pts), a, b);
  const double width = opt.inner_panel_scale * std::min(std_dev(src), 8.0 / k);
  return quad::integrate_pieces([&](double x) { return g_pdf(y - x, s, loss) * pdf(src, x); },
                                breaks, width);
}

namespace detail {

inline double neg_r_log_r(double r) { return r > 0.0 ? -r * std::log(r) : 0.0; }

template <class Density>
double entropy_of_density(Density&& r, double lo, double hi, std::vector<double> kinks,
                          const EntropyQuadrature& opt) {
  const auto breaks = quad::make_breaks(std::move(kinks), lo, hi);
  return quad::integrate_adaptive_pieces([&](double y) { return neg_r_log_r(r(y)); }, breaks,
                                         opt.abs_tol, opt.max_depth);
}

}  // namespace detail

/// Outer integration range for h(g_s * p): source support widened by the
/// band and 40 decay lengths of the kernel tails.
inline std::pair<double, double> reproduction_range(const Source& src, double s,
                                                    const EpsilonLoss& loss) {
  const double reach = loss.epsilon() + 40.0 / std::abs(s);
  const auto [lo, hi] = effective_support(src);
  return {lo - reach, hi + reach};
}

/// h(r_s) for r_s = g_s * p. The Laplacian uses the closed-form r_s away from
/// |s| = alpha and numeric convolution otherwise.
inline double reproduction_entropy(const Source& src, double s, const EpsilonLoss& loss,
                                   const EntropyQuadrature& opt = {}) {
  detail::require_slope(s, "reproduction_entropy");
  const double eps = loss.epsilon();
  const auto [lo, hi] = reproduction_range(src, s, loss);
  std::vector<double> kinks{-eps, 0.0, eps};
  if (const auto* l = src.as_laplacian(); l && !near_laplacian_singularity(s, l->alpha)) {
    const double alpha = l->alpha;
    return detail::entropy_of_density(
        [&](double y) { return r_s_pdf_laplacian(y, s, alpha, loss); }, lo, hi, kinks, opt);
  }
  if (const auto* t = src.as_tabulated()) {
    kinks.push_back(t->lower_edge() - eps);
    kinks.push_back(t->lower_edge() + eps);
    kinks.push_back(t->upper_edge() - eps);
    kinks.push_back(t->upper_edge() + eps);
  }
  return detail::entropy_of_density(
      [&](double y) { return convolved_density(src, s, loss, y, opt); }, lo, hi, kinks, opt);
}

/// R_U(D_s) = h(g_s * p) - h(g_s).
inline RDPoint r_u(const Source& src, double s, const EpsilonLoss& loss,
                   const EntropyQuadrature& opt = {}) {
  const SlopeState st = SlopeState::at(s, loss);
  return RDPoint::clamped_rate(st.d_s, reproduction_entropy(src, s, loss, opt) - st.h_gs, s);
}

/// R_GE(D_s) = 1/2 log(2 pi e (v_p + v_s)) - h(g_s).
inline RDPoint gaussian_entropy_bound(const Source& src, double s, const EpsilonLoss& loss) {
  const SlopeState st = SlopeState::at(s, loss);
  const double v = variance(src) + st.v_gs;
  const double raw = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * v) - st.h_gs;
  return RDPoint::clamped_rate(st.d_s, raw, s);
}

/// Closed-form upper bound on R_U for the Laplacian(alpha) source:
///   -log(c_s / (2 C_s)) - (alpha eps / C_s) B_s + (alpha / C_s) E_s - h(g_s).
/// Throws singular_slope_error inside the |s| = alpha window.
inline RDPoint analytic_upper_laplacian(double s, double alpha, const EpsilonLoss& loss) {
  const LaplacianAuxiliaries aux = laplacian_auxiliaries(s, alpha, loss);
  const SlopeState st = SlopeState::at(s, loss);
  const double c = st.c_norm;
  const double raw = -std::log(aux.c_s / (2.0 * c)) - alpha * loss.epsilon() / c * aux.b_int +
                     alpha / c * aux.e_int - st.h_gs;
  return RDPoint::clamped_rate(st.d_s, raw, s);
}

}  // namespace epsrd
