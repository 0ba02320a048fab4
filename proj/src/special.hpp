#pragma once

// Internal special-function helpers shared by the distribution code.

#include <cmath>
#include <numbers>

namespace mmuq::detail {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

/// log of the standard normal CDF, accurate far into the lower tail.
inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic expansion of the Mills ratio.
  const double z2 = z * z;
  const double inv = 1.0 / z2;
  const double series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv)));
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log(series);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/// Log density of the standard logistic distribution.
inline double log_std_logistic_pdf(double z) {
  const double a = std::fabs(z);
  return -a - 2.0 * std::log1p(std::exp(-a));
}

}  // namespace mmuq::detail
