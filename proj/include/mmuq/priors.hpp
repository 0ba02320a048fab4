#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmuq/dists.hpp"
#include "mmuq/random.hpp"

namespace mmuq {

struct EnsembleConfig;

/// Proper uniform prior over an axis-aligned box in native parameters.
struct UniformBoxPrior {
  ParamVector lo;
  ParamVector hi;
  std::string label = "noninformative";

  double volume() const noexcept { return (hi[0] - lo[0]) * (hi[1] - lo[1]); }
  bool contains(const ParamVector& theta) const noexcept {
    return theta[0] >= lo[0] && theta[0] <= hi[0] && theta[1] >= lo[1] && theta[1] <= hi[1];
  }
};

/// Product-Gaussian kernel density estimate over parameter samples.
class KdePrior {
 public:
  KdePrior(std::vector<ParamVector> support, ParamVector bandwidths, std::string label);

  const std::vector<ParamVector>& support() const noexcept { return support_; }
  const ParamVector& bandwidths() const noexcept { return bandwidths_; }
  const std::string& label() const noexcept { return label_; }

  /// Log density, stable far into the Gaussian tails.
  double log_density(const ParamVector& theta) const;
  ParamVector sample(RandomStream& rng) const;

 private:
  std::vector<ParamVector> support_;
  ParamVector bandwidths_;
  std::string label_;
  // Support coordinates divided by the bandwidth, one array per dimension.
  std::vector<double> scaled0_;
  std::vector<double> scaled1_;
  double log_norm_;
};

using ParameterPrior = std::variant<UniformBoxPrior, KdePrior>;

std::string prior_label(const ParameterPrior& prior);

/// Envelope of plausible yield-strength populations the default boxes cover.
inline constexpr std::array<double, 2> kEnvelopeMean = {20.0, 60.0};
inline constexpr std::array<double, 2> kEnvelopeCov = {0.01, 0.35};

/// Bounding box of the family's parameters over the mean/COV envelope.
UniformBoxPrior default_uniform_prior(ModelFamily family);

/// Per-dimension AMISE-optimal Gaussian bandwidths:
/// w_i = [4/(K+2)]^{1/(K+4)} n^{-1/(K+4)} sigma_i.
ParamVector kde_bandwidths(const std::vector<ParamVector>& samples, int dimension = 2);

/// KDE with AMISE bandwidths over the given samples.
KdePrior fit_kde_prior(std::vector<ParamVector> samples, std::string label);

/// Runs the pre-Bayesian inference on historical data under the pre-prior
/// and fits a KDE to all post-burn-in samples. A nonzero max_support thins
/// the chain evenly to at most that many points, trading fidelity for
/// speed (each density evaluation costs O(support)).
KdePrior build_informative_prior(ModelFamily family, const Dataset& historical, const UniformBoxPrior& pre_prior,
                                 const EnsembleConfig& cfg, std::size_t max_support = 0);

double log_prior_density(const ParameterPrior& prior, const ParamVector& theta);
double prior_density(const ParameterPrior& prior, const ParamVector& theta);

ParamVector prior_sample_one(const ParameterPrior& prior, RandomStream& rng);
std::vector<ParamVector> prior_sample(const ParameterPrior& prior, RandomStream& rng, std::size_t count);

/// Summary statistics of a historical steel population.
struct MaterialSpec {
  std::string_view name;
  double min;
  double max;
  double mean;
  double cov;
  ModelFamily family;
  std::size_t n_tests;
};

/// ABS-A, ABS-B, ABS-C and ASTM-A7 yield-strength summaries (ksi).
const std::array<MaterialSpec, 4>& historical_materials();
const MaterialSpec& material_by_name(std::string_view name);

/// Synthetic stand-in for a historical dataset: n_tests draws from the
/// stated family with the stated mean and COV.
Dataset synthesize_historical(const MaterialSpec& material, std::uint64_t seed);

}  // namespace mmuq
