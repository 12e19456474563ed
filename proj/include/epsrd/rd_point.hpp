#pragma once

#include <algorithm>
#include <optional>

namespace epsrd {

/// One (D, R) pair of a rate-distortion curve or bound, rates in nats.
/// `raw_r` keeps the unclamped value; `clamped` is set when it was negative.
struct RDPoint {
  double d = 0.0;
  double r = 0.0;
  std::optional<double> s;
  double raw_r = 0.0;
  bool clamped = false;

  static RDPoint clamped_rate(double d, double raw, std::optional<double> s = std::nullopt) {
    return RDPoint{d, std::max(raw, 0.0), s, raw, raw < 0.0};
  }
};

}  // namespace epsrd
