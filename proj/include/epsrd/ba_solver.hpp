#pragma once

// Discretized Blahut-Arimoto iteration at a fixed slope s.
//
// The source is sampled on a uniform symmetric grid and the reproduction grid
// is the same grid, so the kernel exp(s * rho_eps(x_i - y_j)) depends only on
// i - j. Outside the insensitivity band the kernel is geometric in the offset,
// which lets a kernel-vector product run as a short band sum plus two
// first-order recursions instead of a dense N x N product.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epsrd/epsilon_kernel.hpp"
#include "epsrd/parallel.hpp"
#include "epsrd/rd_point.hpp"
#include "epsrd/sources.hpp"

namespace epsrd {

struct BAProblem {
  std::vector<double> x_grid;
  std::vector<double> p_mass;
  std::vector<double> y_grid;
  EpsilonLoss loss;
  double s = -1.0;
  double spacing = 0.0;
  double truncated_tail = 0.0;
};

struct BAResult {
  std::vector<double> q_mass;
  double d_s = 0.0;
  double r_s = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
  double final_change = 0.0;  // sup-norm change of the last update
  double duality_gap = 0.0;   // log max_j c_j at the returned iterate
};

struct BAOptions {
  double tol = 1e-10;             // sup-norm change of q between iterates
  std::size_t max_iter = 200000;
  bool record_trace = true;
  // When > 0, also stop once log max_j c_j <= gap_tol. That quantity bounds
  // the distance of the current objective from its minimum.
  double gap_tol = 0.0;
};

/// Tail mass above which build_problem refuses the requested span.
inline constexpr double kMaxTruncatedTail = 1e-8;

/// Half-width in standard deviations that leaves at most 1e-10 of tail mass.
inline double default_span_sigmas(const Source& src) {
  return required_half_width(src, 1e-10) / std_dev(src) * (1.0 + 1e-9);
}

/// Smallest span (in standard deviations, tail mass <= 1e-10) whose grid
/// spacing puts eps at a half-integer multiple of the spacing. The discrete
/// insensitivity band then covers whole cells of total width 2 eps.
inline double aligned_span_sigmas(const Source& src, const EpsilonLoss& loss, std::size_t n) {
  const double base = default_span_sigmas(src);
  const double eps = loss.epsilon();
  const std::size_t half = n / 2;
  if (eps == 0.0 || half == 0) return base;
  const double spacing = base * std_dev(src) / static_cast<double>(half);
  const double cells = eps / spacing;
  if (cells < 0.5) return base;
  const double aligned = std::floor(cells - 0.5) + 0.5;
  return eps / aligned * static_cast<double>(half) / std_dev(src);
}

/// Samples the source on n points over [-span, span], span = span_sigmas *
/// std_dev. Tabulated sources keep their own grid and n is ignored.
inline BAProblem build_problem(const Source& src, const EpsilonLoss& loss, double s,
                               std::size_t n, double span_sigmas) {
  if (!(s < 0.0)) throw std::domain_error("build_problem: slope s must be < 0");
  BAProblem prob;
  prob.loss = loss;
  prob.s = s;
  if (const auto* t = src.as_tabulated()) {
    prob.x_grid = t->grid();
    prob.p_mass = t->masses();
    prob.spacing = t->spacing();
  } else {
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("build_problem: n must be odd and >= 3");
    if (!(span_sigmas > 0.0)) throw std::invalid_argument("build_problem: span must be > 0");
    const double span = span_sigmas * std_dev(src);
    prob.truncated_tail = tail_mass(src, span);
    if (prob.truncated_tail > kMaxTruncatedTail) {
      throw std::invalid_argument("build_problem: insufficient span (tail mass " +
                                  std::to_string(prob.truncated_tail) + ")");
    }
    const std::size_t half = n / 2;
    prob.spacing = span / static_cast<double>(half);
    prob.x_grid.resize(n);
    prob.p_mass.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double offset = static_cast<double>(i) - static_cast<double>(half);
      prob.x_grid[i] = offset * prob.spacing;
      prob.p_mass[i] = pdf(src, prob.x_grid[i]) * prob.spacing;
      total += prob.p_mass[i];
    }
    for (double& m : prob.p_mass) m /= total;
  }
  prob.y_grid = prob.x_grid;
  return prob;
}

inline BAProblem build_problem(const Source& src, const EpsilonLoss& loss, double s,
                               std::size_t n) {
  return build_problem(src, loss, s, n, aligned_span_sigmas(src, loss, n));
}

/// Spacing of the BA grid for n points at the default span.
inline double ba_grid_spacing(const Source& src, const EpsilonLoss& loss, std::size_t n) {
  if (const auto* t = src.as_tabulated()) return t->spacing();
  return aligned_span_sigmas(src, loss, n) * std_dev(src) / static_cast<double>(n / 2);
}

/// Largest |s| at which a grid of the given spacing still represents the
/// kernel: unlimited when the band covers at least one whole cell, otherwise
/// the decay length 1/|s| must span two cells.
inline double max_resolved_slope(double spacing, const EpsilonLoss& loss) {
  if (loss.epsilon() >= 0.5 * spacing) return std::numeric_limits<double>::infinity();
  return 1.0 / (2.0 * spacing);
}

/// Toeplitz kernel K(k) = exp(s * rho_eps(k * spacing)) on a grid of n points.
class ToeplitzKernel {
 public:
  ToeplitzKernel(std::size_t n, double spacing, double s, const EpsilonLoss& loss)
      : n_(n), spacing_(spacing), s_(s), eps_(loss.epsilon()) {
    // band_ = number of offsets k >= 0 with k * spacing < eps
    band_ = static_cast<std::size_t>(std::ceil(eps_ / spacing_));
    while (band_ > 0 && static_cast<double>(band_ - 1) * spacing_ >= eps_) --band_;
    while (static_cast<double>(band_) * spacing_ < eps_) ++band_;
    ratio_ = std::exp(s_ * spacing_);
    right_start_ = band_;
    left_start_ = std::max<std::size_t>(band_, 1);
    right_scale_ = value(right_start_);
    left_scale_ = value(left_start_);
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::size_t band() const noexcept { return band_; }

  [[nodiscard]] double distortion(std::size_t offset) const noexcept {
    const double z = static_cast<double>(offset) * spacing_;
    return z < eps_ ? 0.0 : z - eps_;
  }

  [[nodiscard]] double value(std::size_t offset) const noexcept {
    return std::exp(s_ * distortion(offset));
  }

  /// out[i] = sum_j K(i - j) in[j]. The kernel is symmetric, so this is also
  /// the transposed product. Not safe to call concurrently on one instance.
  void apply(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = n_;
    band_sum(in, out);
    // offsets k = i - j >= R: out[i] += scale * u[i - R] with
    // u[m] = sum_{j <= m} ratio^(m - j) in[j]
    if (right_start_ < n) {
      const std::size_t len = n - right_start_;
      forward_scan(in, len);
      for (std::size_t m = 0; m < len; ++m) out[m + right_start_] += right_scale_ * run_[m];
    }
    // offsets k = j - i >= L: out[i] += scale * v[i + L] with
    // v[m] = sum_{j >= m} ratio^(j - m) in[j]
    if (left_start_ < n) {
      backward_scan(in, left_start_);
      for (std::size_t m = left_start_; m < n; ++m) out[m - left_start_] += left_scale_ * run_[m];
    }
  }

 private:
  // out[i] = sum of in[j] over |i - j| < band_ (kernel value 1). The input is
  // zero-padded so every window has width w = 2 band_ - 1; w is split into
  // power-of-two blocks whose sums come from repeated pairwise doubling. Only
  // non-negative terms are added and every pass vectorizes.
  void band_sum(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = n_;
    std::fill(out.begin(), out.end(), 0.0);
    if (band_ == 0) return;
    const std::size_t reach = band_ - 1;
    const std::size_t len = n + 2 * reach;
    pad_.assign(len, 0.0);
    std::copy(in.begin(), in.end(), pad_.begin() + static_cast<std::ptrdiff_t>(reach));
    double* pad = pad_.data();
    std::size_t rem = 2 * reach + 1;
    std::size_t offset = 0;
    std::size_t width = 1;  // pad[j] holds the sum of `width` padded inputs from j
    std::size_t valid = len;
    for (;;) {
      if (rem & 1) {
        const double* block = pad + offset;
        for (std::size_t i = 0; i < n; ++i) out[i] += block[i];
        offset += width;
      }
      rem >>= 1;
      if (rem == 0) break;
      valid -= width;
      for (std::size_t j = 0; j < valid; ++j) pad[j] += pad[j + width];
      width *= 2;
    }
  }

  // Both scans run as four interleaved recursions with stride 4, so that
  // consecutive steps do not wait on each other. All terms are non-negative.

  // run_[m] = sum_{j <= m} ratio^(m - j) in[j] for m < len.
  void forward_scan(std::span<const double> in, std::size_t len) const {
    const double r1 = ratio_;
    const double r2 = r1 * r1;
    const double r3 = r2 * r1;
    const double r4 = r2 * r2;
    run_.resize(n_);
    const std::size_t head = std::min<std::size_t>(len, 3);
    for (std::size_t m = 0; m < head; ++m) {
      double v = in[m];
      if (m >= 1) v += r1 * in[m - 1];
      if (m >= 2) v += r2 * in[m - 2];
      run_[m] = v;
    }
    for (std::size_t m = 3; m < len; ++m) run_[m] = in[m] + r1 * in[m - 1] + r2 * in[m - 2] + r3 * in[m - 3];
    for (std::size_t m = 4; m < len; ++m) run_[m] += r4 * run_[m - 4];
  }

  // run_[m] = sum_{j >= m} ratio^(j - m) in[j] for lo <= m < n.
  void backward_scan(std::span<const double> in, std::size_t lo) const {
    const std::size_t n = n_;
    const double r1 = ratio_;
    const double r2 = r1 * r1;
    const double r3 = r2 * r1;
    const double r4 = r2 * r2;
    run_.resize(n);
    const std::size_t full_end = n >= 3 ? n - 3 : 0;  // m + 3 < n below this
    for (std::size_t m = std::max(lo, full_end); m < n; ++m) {
      double v = in[m];
      if (m + 1 < n) v += r1 * in[m + 1];
      if (m + 2 < n) v += r2 * in[m + 2];
      run_[m] = v;
    }
    for (std::size_t m = lo; m < full_end; ++m) run_[m] = in[m] + r1 * in[m + 1] + r2 * in[m + 2] + r3 * in[m + 3];
    for (std::size_t m = n >= 4 ? n - 4 : 0; m-- > lo;) run_[m] += r4 * run_[m + 4];
  }

  std::size_t n_;
  double spacing_;
  double s_;
  double eps_;
  std::size_t band_ = 0;
  std::size_t right_start_ = 0;
  std::size_t left_start_ = 1;
  double ratio_ = 0.0;
  double right_scale_ = 0.0;
  double left_scale_ = 0.0;
  mutable std::vector<double> run_;
  mutable std::vector<double> pad_;
};

namespace detail {

// t_i = p_i / z_i, zero where either vanishes; written select-style so it vectorizes
inline void source_ratio(std::span<const double> p, std::span<const double> z, std::vector<double>& t) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool ok = p[i] > 0.0 && z[i] > 0.0;
    const double r = p[i] / (ok ? z[i] : 1.0);
    t[i] = ok ? r : 0.0;
  }
}

/// -sum_i p_i log Z_i over rows with p_i > 0; rows with Z_i == 0 (kernel
/// underflow far in the tails) are skipped.
inline double ba_objective(std::span<const double> p, std::span<const double> z) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0 && z[i] > 0.0) f -= p[i] * std::log(z[i]);
  }
  return f;
}

}  // namespace detail

/// Fixed-slope Blahut-Arimoto from a uniform start. Stops when the sup-norm
/// change of q drops below `tol` or after `max_iter` updates; in the latter
/// case `converged` is false and the last iterate is still evaluated.
inline BAResult ba_iterate(const BAProblem& prob, const BAOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("ba_iterate: tol must be > 0");
  const std::size_t n = prob.x_grid.size();
  if (n == 0 || prob.p_mass.size() != n || prob.y_grid.size() != n) {
    throw std::invalid_argument("ba_iterate: inconsistent problem dimensions");
  }
  const ToeplitzKernel kernel(n, prob.spacing, prob.s, prob.loss);
  const std::span<const double> p(prob.p_mass);

  BAResult res;
  res.q_mass.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> z(n);
  std::vector<double> t(n);
  std::vector<double> c(n);
  std::vector<double>& q = res.q_mass;

  for (;;) {
    kernel.apply(q, z);
    if (opt.record_trace) res.objective_trace.push_back(detail::ba_objective(p, z));
    if (res.converged || res.iterations >= opt.max_iter) break;
    detail::source_ratio(p, z, t);
    kernel.apply(t, c);
    if (opt.gap_tol > 0.0) {
      double c_max = 0.0;
      for (std::size_t j = 0; j < n; ++j) c_max = std::max(c_max, c[j]);
      if (std::log(c_max) <= opt.gap_tol) {
        res.converged = true;
        break;
      }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double next = q[j] * c[j];
      t[j] = next < 1e-300 ? 0.0 : next;
      total += t[j];
    }
    // four lanes so the max reduction vectorizes without fast-math
    const double inv_total = 1.0 / total;
    std::array<double, 4> lane{};
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      for (std::size_t l = 0; l < 4; ++l) {
        const double next = t[j + l] * inv_total;
        const double d = std::abs(next - q[j + l]);
        lane[l] = d > lane[l] ? d : lane[l];
        q[j + l] = next;
      }
    }
    for (; j < n; ++j) {
      const double next = t[j] * inv_total;
      lane[0] = std::max(lane[0], std::abs(next - q[j]));
      q[j] = next;
    }
    const double change = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    ++res.iterations;
    res.final_change = change;
    if (change < opt.tol) res.converged = true;
  }

  // Final (D, R) from the conditional q(y_j | x_i) = q_j K_ij / Z_i, with the
  // mutual information taken against the induced output marginal q_j c_j.
  detail::source_ratio(p, z, t);
  kernel.apply(t, c);
  double c_max = 0.0;
  for (std::size_t j = 0; j < n; ++j) c_max = std::max(c_max, c[j]);
  res.duality_gap = std::log(c_max);
  std::vector<double> kd(n);
  std::vector<double> kv(n);
  for (std::size_t k = 0; k < n; ++k) {
    kv[k] = kernel.value(k);
    kd[k] = kv[k] * kernel.distortion(k);
  }
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (q[j] == 0.0) continue;
      row += q[j] * kd[i > j ? i - j : j - i];
    }
    d += t[i] * row;
  }
  double log_z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] > 0.0) log_z += p[i] * std::log(z[i]);
  }
  double marginal_term = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = q[j] * c[j];
    if (r > 0.0) marginal_term += r * std::log(c[j]);
  }
  res.d_s = d;
  res.r_s = std::max(0.0, prob.s * d - log_z - marginal_term);
  return res;
}

inline BAResult ba_iterate(const BAProblem& prob, double tol, std::size_t max_iter) {
  return ba_iterate(prob, BAOptions{tol, max_iter, true});
}

struct BACurvePoint {
  RDPoint point;
  std::size_t iterations = 0;
  bool converged = false;
  double duality_gap = 0.0;
  std::string error;  // non-empty when the point could not be computed
};

/// One BA solve per slope, sorted by D (failed points last). Errors are
/// recorded per point and do not abort the sweep.
inline std::vector<BACurvePoint> ba_curve(const Source& src, const EpsilonLoss& loss,
                                          std::span<const double> s_list, std::size_t n,
                                          const BAOptions& opt = {BAOptions{1e-10, 200000, false}},
                                          unsigned threads = 1) {
  if (s_list.empty()) throw std::invalid_argument("ba_curve: empty slope list");
  std::vector<BACurvePoint> out(s_list.size());
  parallel_for(s_list.size(), threads, [&](std::size_t k) {
    BACurvePoint& pt = out[k];
    pt.point.s = s_list[k];
    try {
      const BAProblem prob = build_problem(src, loss, s_list[k], n);
      const BAResult res = ba_iterate(prob, opt);
      pt.point.d = res.d_s;
      pt.point.r = res.r_s;
      pt.point.raw_r = res.r_s;
      pt.iterations = res.iterations;
      pt.converged = res.converged;
      pt.duality_gap = res.duality_gap;
    } catch (const std::exception& e) {
      pt.error = e.what();
      pt.point.d = std::numeric_limits<double>::quiet_NaN();
      pt.point.r = std::numeric_limits<double>::quiet_NaN();
    }
  });
  std::stable_sort(out.begin(), out.end(), [](const BACurvePoint& a, const BACurvePoint& b) {
    if (a.error.empty() != b.error.empty()) return a.error.empty();
    return a.point.d < b.point.d;
  });
  return out;
}

}  // namespace epsrd
