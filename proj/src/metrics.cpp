#include "mmuq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mmuq/errors.hpp"

namespace mmuq {

EmpiricalCdf::EmpiricalCdf(std::vector<double> sample) : sorted_(std::move(sample)) {
  if (sorted_.empty()) throw std::invalid_argument("EmpiricalCdf: empty sample");
  for (double v : sorted_)
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalCdf: non-finite value");
  std::sort(sorted_.begin(), sorted_.end());
  const double n = static_cast<double>(sorted_.size());
  for (std::size_t k = 0; k < sorted_.size(); ++k) {
    if (k + 1 < sorted_.size() && sorted_[k + 1] == sorted_[k]) continue;
    values_.push_back(sorted_[k]);
    probs_.push_back(static_cast<double>(k + 1) / n);
  }
  probs_.back() = 1.0;
}

double EmpiricalCdf::operator()(double y) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), y);
  if (it == values_.begin()) return 0.0;
  return probs_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double EmpiricalCdf::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("EmpiricalCdf::quantile: p outside [0, 1]");
  const double pos = p * static_cast<double>(sorted_.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_[lo] + frac * (sorted_[hi] - sorted_[lo]);
}

namespace {

double trapezoid_distance(const DistributionEnsemble& ens, ModelFamily truth_family, const ParamVector& truth_theta,
                          const Grid& grid) {
  std::vector<double> truth(grid.n);
  for (std::size_t k = 0; k < grid.n; ++k) truth[k] = pdf(truth_family, truth_theta, grid.at(k));
  double total = 0.0;
  for (const auto& m : ens.members) {
    double s = 0.0;
    for (std::size_t k = 0; k < grid.n; ++k) {
      const double diff = pdf(m.model, m.theta, grid.at(k)) - truth[k];
      const double sq = diff * diff;
      s += (k == 0 || k + 1 == grid.n) ? 0.5 * sq : sq;
    }
    total += s * grid.step();
  }
  return 0.5 * total / static_cast<double>(ens.size());
}

}  // namespace

double avg_mean_square_distance(const DistributionEnsemble& ens, ModelFamily truth_family,
                                const ParamVector& truth_theta, const Grid& grid) {
  if (ens.members.empty()) throw std::invalid_argument("avg_mean_square_distance: empty ensemble");
  if (grid.n < 2 || !(grid.hi > grid.lo)) throw std::invalid_argument("avg_mean_square_distance: invalid grid");
  require_valid(truth_family, truth_theta);
  const double coarse = trapezoid_distance(ens, truth_family, truth_theta, grid);
  const double fine = trapezoid_distance(ens, truth_family, truth_theta, grid.refined());
  if (std::fabs(coarse - fine) > 0.01 * std::fabs(fine) + 1e-12)
    throw GridResolutionError("avg_mean_square_distance: grid of " + std::to_string(grid.n) +
                              " points does not resolve the densities (" + std::to_string(coarse) + " vs " +
                              std::to_string(fine) + " on refinement)");
  return fine;
}

bool grid_covers(const DistributionEnsemble& ens, ModelFamily truth_family, const ParamVector& truth_theta,
                 const Grid& grid, double level) {
  auto small_at_ends = [&](ModelFamily f, const ParamVector& t) {
    return pdf(f, t, grid.lo) <= level && pdf(f, t, grid.hi) <= level;
  };
  if (!small_at_ends(truth_family, truth_theta)) return false;
  return std::all_of(ens.members.begin(), ens.members.end(),
                     [&](const EnsembleMember& m) { return small_at_ends(m.model, m.theta); });
}

double confidence_range(const EmpiricalCdf& cdf) {
  if (cdf.sample_size() < kMinRangePoints)
    throw std::invalid_argument("confidence_range: need at least " + std::to_string(kMinRangePoints) +
                                " points, got " + std::to_string(cdf.sample_size()));
  return cdf.quantile(0.975) - cdf.quantile(0.025);
}

double area_validation_metric(const EmpiricalCdf& cdf, double truth) {
  // Breakpoints of both step functions; between consecutive breakpoints
  // |F - T| is constant.
  std::vector<double> knots = cdf.values();
  knots.insert(std::upper_bound(knots.begin(), knots.end(), truth), truth);
  double area = 0.0;
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    const double f = cdf(knots[j]);
    const double t = knots[j] >= truth ? 1.0 : 0.0;
    area += std::fabs(f - t) * (knots[j + 1] - knots[j]);
  }
  return area;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: constant series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mmuq
