#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scalefisher {

/// Neumaier-compensated running sum. Terms are accumulated in the order they
/// are added, so callers control reproducibility through iteration order.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      compensation_ += (sum_ - t) + x;
    else
      compensation_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline constexpr double pi = std::numbers::pi;

inline double sign(double x) noexcept { return (x > 0.0) - (x < 0.0); }

/// Relative difference |a - b| / max(|a|, |b|), zero when both vanish.
inline double relative_difference(double a, double b) noexcept {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace scalefisher
