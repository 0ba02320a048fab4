#pragma once

#include <span>
#include <vector>

#include "mmuq/dists.hpp"
#include "mmuq/ensemble.hpp"

namespace mmuq {

/// Empirical distribution of a sample. Tied values are merged, so the
/// stored cumulative probabilities are strictly increasing and end at 1.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> sample);

  /// Distinct values, ascending.
  const std::vector<double>& values() const noexcept { return values_; }
  /// F at each distinct value.
  const std::vector<double>& probabilities() const noexcept { return probs_; }
  /// The full sorted sample, ties included.
  const std::vector<double>& sorted_sample() const noexcept { return sorted_; }
  std::size_t sample_size() const noexcept { return sorted_.size(); }

  /// F(y) = fraction of the sample <= y.
  double operator()(double y) const;

  /// Quantile by linear interpolation between order statistics
  /// (position p (n - 1) in the sorted sample).
  double quantile(double p) const;

 private:
  std::vector<double> sorted_;
  std::vector<double> values_;
  std::vector<double> probs_;
};

/// Uniform evaluation grid for density integrals.
struct Grid {
  double lo = 15.0;
  double hi = 65.0;
  std::size_t n = 2001;

  double step() const noexcept { return (hi - lo) / static_cast<double>(n - 1); }
  double at(std::size_t i) const noexcept { return lo + static_cast<double>(i) * step(); }
  /// Same interval with twice the resolution.
  Grid refined() const noexcept { return {lo, hi, 2 * n - 1}; }
};

/// (1/2)(1/N_d) sum_i integral (p_i - p)^2 dx, trapezoid rule on the grid.
/// Repeats the integral on the refined grid and throws GridResolutionError
/// if the two differ by more than 1% (plus 1e-12 absolute).
double avg_mean_square_distance(const DistributionEnsemble& ens, ModelFamily truth_family,
                                const ParamVector& truth_theta, const Grid& grid = {});

/// True when every member density and the truth are below `level` at both
/// ends of the grid.
bool grid_covers(const DistributionEnsemble& ens, ModelFamily truth_family, const ParamVector& truth_theta,
                 const Grid& grid = {}, double level = 1e-12);

inline constexpr std::size_t kMinRangePoints = 40;

/// Q(0.975) - Q(0.025). Throws std::invalid_argument below 40 points.
double confidence_range(const EmpiricalCdf& cdf);

/// Integral of |F(y) - 1[y >= truth]| dy, exact for the step function F.
double area_validation_metric(const EmpiricalCdf& cdf, double truth);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mmuq
