#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testing {

/// Trapezoid rule on n uniform points over [a, b].
inline double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / static_cast<double>(n - 1);
  double s = 0.5 * (f(a) + f(b));
  for (std::size_t k = 1; k + 1 < n; ++k) s += f(a + h * static_cast<double>(k));
  return s * h;
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double f = cdf(x[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

/// 1% critical value of the one-sample KS statistic (large-n asymptote).
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Pearson chi-square statistic of observed counts against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) s += (observed[k] - expected[k]) * (observed[k] - expected[k]) / expected[k];
  return s;
}

/// Upper 1% point of chi-square with df degrees of freedom
/// (Wilson-Hilferty approximation, good to a fraction of a percent for df >= 5).
inline double chi_square_critical_1pct(int df) {
  const double k = static_cast<double>(df);
  const double z = 2.326348;
  const double c = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * c * c * c;
}

}  // namespace testing
