#pragma once

// Epsilon-insensitive loss and the tilted density
//   g_s(x) = exp(s * rho_eps(x)) / C_s,   s < 0,
// which is uniform on (-eps, eps) with exponential tails of rate |s|.
// Every quantity here has a closed form; eps == 0 uses explicit Laplace
// branches rather than the eps > 0 expressions.

#include <cmath>
#include <stdexcept>
#include <string>

namespace epsrd {

class EpsilonLoss {
 public:
  constexpr EpsilonLoss() = default;

  explicit EpsilonLoss(double epsilon) : epsilon_(epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw std::domain_error("EpsilonLoss: epsilon must be finite and >= 0");
    }
  }

  [[nodiscard]] constexpr double epsilon() const noexcept { return epsilon_; }
  [[nodiscard]] constexpr bool is_absolute() const noexcept { return epsilon_ == 0.0; }

  [[nodiscard]] double operator()(double z) const noexcept {
    const double a = std::abs(z);
    return a < epsilon_ ? 0.0 : a - epsilon_;
  }

 private:
  double epsilon_ = 0.0;
};

inline double rho(double z, const EpsilonLoss& loss) noexcept { return loss(z); }

namespace detail {

inline double require_slope(double s, const char* who) {
  if (!(s < 0.0) || !std::isfinite(s)) {
    throw std::domain_error(std::string(who) + ": slope s must be finite and < 0");
  }
  return -s;
}

}  // namespace detail

/// C_s = 2 (1 + |s| eps) / |s|.
inline double normalizer(double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "normalizer");
  return 2.0 * (1.0 + k * loss.epsilon()) / k;
}

inline double g_pdf(double x, double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "g_pdf");
  const double eps = loss.epsilon();
  const double c = 2.0 * (1.0 + k * eps) / k;
  const double a = std::abs(x);
  if (a < eps) return 1.0 / c;
  return std::exp(-k * (a - eps)) / c;
}

/// Upper-tail probability P(X > x) under g_s.
inline double g_survival(double x, double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "g_survival");
  const double eps = loss.epsilon();
  const double c = 2.0 * (1.0 + k * eps) / k;
  const double tail = 1.0 / (k * c);  // mass of one exponential tail
  if (x >= eps) return tail * std::exp(-k * (x - eps));
  if (x > -eps) return tail + (eps - x) / c;
  return 1.0 - tail * std::exp(-k * (-x - eps));
}

inline double g_cdf(double x, double s, const EpsilonLoss& loss) {
  return g_survival(-x, s, loss);
}

/// Probability of (a, b] under g_s, computed on the side that avoids
/// cancellation against 1.
inline double g_mass(double a, double b, double s, const EpsilonLoss& loss) {
  if (b <= a) return 0.0;
  if (a >= 0.0) return g_survival(a, s, loss) - g_survival(b, s, loss);
  if (b <= 0.0) return g_cdf(b, s, loss) - g_cdf(a, s, loss);
  return 1.0 - g_cdf(a, s, loss) - g_survival(b, s, loss);
}

/// Differential entropy h(g_s) in nats.
inline double g_entropy(double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "g_entropy");
  if (loss.is_absolute()) return std::log(2.0 / k) + 1.0;
  const double ke = k * loss.epsilon();
  return std::log(2.0 * (1.0 + ke) / k) + 1.0 / (1.0 + ke);
}

/// D_s = E_{g_s}[rho_eps] = 1 / ((1 + eps |s|) |s|).
inline double distortion_of_slope(double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "distortion_of_slope");
  return 1.0 / ((1.0 + loss.epsilon() * k) * k);
}

/// Inverse of distortion_of_slope. For eps > 0 the positive root of
/// eps D k^2 + D k - 1 = 0 is evaluated as 2 / (D + sqrt(D^2 + 4 D eps)),
/// which avoids the cancellation in (-D + sqrt(D^2 + 4 D eps)) / (2 D eps).
inline double slope_of_distortion(double d, const EpsilonLoss& loss) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw std::domain_error("slope_of_distortion: D must be finite and > 0");
  }
  if (loss.is_absolute()) return -1.0 / d;
  const double eps = loss.epsilon();
  return -2.0 / (d + std::sqrt(d * d + 4.0 * d * eps));
}

/// Second moment of g_s (its mean is zero).
inline double g_variance(double s, const EpsilonLoss& loss) {
  const double k = detail::require_slope(s, "g_variance");
  if (loss.is_absolute()) return 2.0 / (k * k);
  const double eps = loss.epsilon();
  const double c = 2.0 * (1.0 + k * eps) / k;
  return (2.0 / c) *
         (eps * eps * eps / 3.0 + (1.0 / k) * (eps * eps + 2.0 * eps / k + 2.0 / (k * k)));
}

/// A slope together with the closed-form quantities of g_s at that slope.
struct SlopeState {
  double s = -1.0;
  double epsilon = 0.0;
  double c_norm = 2.0;
  double d_s = 1.0;
  double h_gs = 0.0;
  double v_gs = 2.0;

  static SlopeState at(double s, const EpsilonLoss& loss) {
    return SlopeState{s,
                      loss.epsilon(),
                      normalizer(s, loss),
                      distortion_of_slope(s, loss),
                      g_entropy(s, loss),
                      g_variance(s, loss)};
  }
};

}  // namespace epsrd
