#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "mmuq/dists.hpp"
#include "mmuq/priors.hpp"
#include "mmuq/random.hpp"

namespace mmuq {

/// Prior model probabilities pi_j, one per candidate model.
struct ModelPriorProbs {
  std::vector<double> pi;

  /// Throws std::invalid_argument unless every entry is >= 0 and the sum
  /// is 1 within 1e-12.
  void validate() const;
};

/// Posterior model probabilities and the log-evidences they came from.
struct ModelPosteriorProbs {
  std::vector<double> pi_hat;
  std::vector<double> log_evidence;
};

/// Monte Carlo estimate of the log marginal likelihood with its delta-method
/// standard error.
struct EvidenceEstimate {
  double log_evidence;
  double std_error;  // +inf for a single draw
  std::size_t n_draws;
  std::size_t n_finite;
};

/// log[(1/N_k) sum_k p(d | theta_k)], theta_k drawn from the parameter prior.
/// Throws EvidenceError if every draw has zero likelihood.
EvidenceEstimate estimate_log_evidence(ModelFamily family, const Dataset& data, const ParameterPrior& prior,
                                       std::size_t n_k, RandomStream& rng);

double log_evidence_mc(ModelFamily family, const Dataset& data, const ParameterPrior& prior, std::size_t n_k,
                       RandomStream& rng);

/// Bayes' rule over models, evaluated relative to the largest log-evidence.
ModelPosteriorProbs model_posteriors(std::span<const double> log_evidence, const ModelPriorProbs& prior);

struct MleResult {
  ParamVector theta;
  double max_log_likelihood;
  int iterations;
};

/// Maximum likelihood estimate via Nelder-Mead from a moment-matched start
/// (500 iterations, relative tolerance 1e-10, one restart).
MleResult maximize_likelihood(ModelFamily family, const Dataset& data);

inline double aic_from(double max_log_likelihood, int k) { return -2.0 * max_log_likelihood + 2.0 * k; }
double bic_from(double max_log_likelihood, int k, std::size_t n);

double aic(ModelFamily family, const Dataset& data);
double bic(ModelFamily family, const Dataset& data);

/// Akaike weights exp(-Delta_j/2) / sum_k exp(-Delta_k/2).
std::vector<double> aic_weights(std::span<const double> aics);

/// Generalized BIC weights exp(-(BIC_j - BIC_min)/2) pi_j, normalized.
std::vector<double> bic_weights(std::span<const double> bics, const ModelPriorProbs& prior);

/// pi_j proportional to exp(K_j ln(n)/2 - K_j); turns BIC weights into AIC weights.
ModelPriorProbs savvy_prior(std::span<const int> dimensions, std::size_t n);

ModelPriorProbs uniform_model_prior(std::size_t m);

/// Prior mass `favoured_mass` on one family, the rest shared equally.
ModelPriorProbs concentrated_model_prior(ModelFamily favoured, double favoured_mass = 0.9);

}  // namespace mmuq
