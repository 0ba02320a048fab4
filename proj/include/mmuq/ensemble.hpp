#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmuq/dists.hpp"
#include "mmuq/evidence.hpp"
#include "mmuq/mcmc.hpp"
#include "mmuq/random.hpp"

namespace mmuq {

struct EnsembleMember {
  ModelFamily model;
  ParamVector theta;
};

/// A finite sample of candidate distributions representing model-form and
/// parameter uncertainty together. Its sampling density is the equally
/// weighted mixture of the members.
struct DistributionEnsemble {
  std::vector<EnsembleMember> members;
  std::string source;

  std::size_t size() const noexcept { return members.size(); }
};

/// Categorical draws of member model forms according to pi_hat.
std::vector<ModelFamily> draw_member_models(const ModelPosteriorProbs& probs, std::size_t n_d, RandomStream& rng);

/// Gives each member parameters drawn uniformly from its model's chain.
/// Throws std::invalid_argument if a listed model has no nonempty chain.
DistributionEnsemble assign_member_parameters(std::span<const ModelFamily> models, std::span<const PosteriorChain> chains,
                                              RandomStream& rng, std::string source = {});

/// draw_member_models followed by assign_member_parameters on the same
/// stream. Every model with pi_hat > 0 must have a nonempty chain.
DistributionEnsemble draw_ensemble(std::span<const PosteriorChain> chains, const ModelPosteriorProbs& probs,
                                   std::size_t n_d, RandomStream& rng, std::string source = {});

double mixture_log_density(const DistributionEnsemble& ens, double x);
/// (1/N_d) sum_i p_i(x).
double mixture_density(const DistributionEnsemble& ens, double x);

/// Draws from the mixture: a member uniformly, then x from that member.
std::vector<double> sample_mixture(const DistributionEnsemble& ens, RandomStream& rng, std::size_t n);

struct MemberStatistics {
  double mean;
  double variance;
  double pf;
  double mean_weight;  // (1/N) sum_k w_ik, close to 1 when q covers p_i
  double mean_se;
  double variance_se;
  double pf_se;
};

struct PropagationResult {
  std::vector<double> x_samples;
  std::vector<double> g_values;
  std::vector<MemberStatistics> members;
};

struct PropagationOptions {
  double threshold = 0.6;   // failure when g(x) < threshold
  std::size_t workers = 1;  // 0 = hardware concurrency
  std::size_t chunk_size = 4096;
};

/// Importance-sampling statistics for every member from one sample set:
/// w_ik = p_i(x_k) / q(x_k). Results do not depend on options.workers.
PropagationResult reweight(const DistributionEnsemble& ens, std::vector<double> x_samples, std::vector<double> g_values,
                           const PropagationOptions& options = {});

/// Single-loop propagation: n draws from the mixture, one evaluation of g
/// per draw, reweighted for every member. g must be safe to call
/// concurrently. Throws ResponseError on a non-finite g.
PropagationResult propagate(const DistributionEnsemble& ens, const std::function<double(double)>& g, std::size_t n,
                            RandomStream& rng, const PropagationOptions& options = {});

}  // namespace mmuq
