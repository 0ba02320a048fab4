#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmuq/dists.hpp"
#include "mmuq/errors.hpp"
#include "mmuq/priors.hpp"
#include "mmuq/random.hpp"

namespace mmuq {

/// Tuning of the affine-invariant stretch-move ensemble.
struct EnsembleConfig {
  int n_walkers = 32;
  int n_steps = 2000;
  int burn_in = 500;
  double stretch_a = 2.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless n_walkers is even and >= 2*dim,
  /// 0 < burn_in < n_steps and stretch_a > 1.
  void validate(int dim) const;
};

/// Post-burn-in samples of one model's parameter posterior, flattened
/// step-major across walkers.
struct PosteriorChain {
  ModelFamily model;
  std::vector<ParamVector> samples;
  double acceptance_rate = 0.0;
  int n_walkers = 0;
};

/// Stretch factor z with density proportional to 1/sqrt(z) on [1/a, a].
inline double sample_stretch(double a, RandomStream& rng) {
  const double r = (a - 1.0) * rng.uniform() + 1.0;
  return r * r / a;
}

/// Normalized density of sample_stretch.
inline double stretch_density(double a, double z) {
  if (z < 1.0 / a || z > a) return 0.0;
  return 1.0 / (2.0 * (std::sqrt(a) - 1.0 / std::sqrt(a)) * std::sqrt(z));
}

template <std::size_t Dim>
struct EnsembleRun {
  std::vector<std::array<double, Dim>> samples;  // step-major, n_walkers per step
  double acceptance_rate = 0.0;
  int n_walkers = 0;
};

/// Goodman-Weare ensemble with the two-half-ensemble stretch update.
///
/// `log_density` returns the unnormalized log target (-inf outside the
/// support); `draw_initial(rng)` proposes walker starts, retried up to 100
/// times per walker until the target is finite. `context` names the target
/// in error messages.
template <std::size_t Dim, typename LogDensity, typename Initial>
EnsembleRun<Dim> run_stretch_ensemble(LogDensity&& log_density, Initial&& draw_initial, const EnsembleConfig& cfg,
                                      const std::string& context) {
  using Point = std::array<double, Dim>;
  cfg.validate(static_cast<int>(Dim));
  RandomStream rng(cfg.seed);
  const auto n_walkers = static_cast<std::size_t>(cfg.n_walkers);
  const std::size_t half = n_walkers / 2;

  std::vector<Point> pos(n_walkers);
  std::vector<double> lp(n_walkers);
  for (std::size_t w = 0; w < n_walkers; ++w) {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      pos[w] = draw_initial(rng);
      lp[w] = log_density(pos[w]);
      ok = std::isfinite(lp[w]);
    }
    if (!ok) throw InitializationError("no walker start with finite posterior after 100 draws: " + context);
  }

  EnsembleRun<Dim> run;
  run.n_walkers = cfg.n_walkers;
  run.samples.reserve(static_cast<std::size_t>(cfg.n_steps - cfg.burn_in) * n_walkers);
  std::size_t accepted_total = 0;
  std::size_t accepted_kept = 0;
  const double exponent = static_cast<double>(Dim) - 1.0;

  for (int step = 0; step < cfg.n_steps; ++step) {
    for (std::size_t h = 0; h < 2; ++h) {
      const std::size_t begin = h * half;
      const std::size_t other = (1 - h) * half;
      for (std::size_t k = begin; k < begin + half; ++k) {
        const Point& partner = pos[other + rng.index(half)];
        const double z = sample_stretch(cfg.stretch_a, rng);
        Point proposal;
        for (std::size_t d = 0; d < Dim; ++d) proposal[d] = partner[d] + z * (pos[k][d] - partner[d]);
        const double lp_new = log_density(proposal);
        const double log_ratio = exponent * std::log(z) + lp_new - lp[k];
        if (std::log(rng.uniform()) < log_ratio) {
          pos[k] = proposal;
          lp[k] = lp_new;
          ++accepted_total;
          if (step >= cfg.burn_in) ++accepted_kept;
        }
      }
    }
    if (step >= cfg.burn_in) run.samples.insert(run.samples.end(), pos.begin(), pos.end());
  }

  if (accepted_total == 0) throw DegenerateChainError("every stretch proposal was rejected: " + context);
  run.acceptance_rate =
      static_cast<double>(accepted_kept) / static_cast<double>(static_cast<std::size_t>(cfg.n_steps - cfg.burn_in) * n_walkers);
  return run;
}

/// Samples p(theta | data, family) proportional to likelihood times prior.
PosteriorChain sample_posterior(ModelFamily family, const Dataset& data, const ParameterPrior& prior,
                                const EnsembleConfig& cfg);

/// Log of the unnormalized posterior; -inf for invalid parameters.
double log_posterior(ModelFamily family, const Dataset& data, const ParameterPrior& prior, const ParamVector& theta);

/// Integrated autocorrelation time of one coordinate, averaging the
/// autocorrelation function over walkers and using an automatic window
/// (smallest M with M >= 5 tau).
double integrated_autocorr_time(std::span<const ParamVector> samples, int n_walkers, std::size_t coordinate);

}  // namespace mmuq
