#include "mmuq/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mmuq/mcmc.hpp"

namespace mmuq {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}  // namespace

KdePrior::KdePrior(std::vector<ParamVector> support, ParamVector bandwidths, std::string label)
    : support_(std::move(support)), bandwidths_(bandwidths), label_(std::move(label)) {
  if (support_.empty()) throw std::invalid_argument("KdePrior: empty support");
  if (!(bandwidths_[0] > 0.0) || !(bandwidths_[1] > 0.0) || !std::isfinite(bandwidths_[0]) ||
      !std::isfinite(bandwidths_[1]))
    throw std::invalid_argument("KdePrior: bandwidths must be positive and finite");
  scaled0_.resize(support_.size());
  scaled1_.resize(support_.size());
  for (std::size_t k = 0; k < support_.size(); ++k) {
    scaled0_[k] = support_[k][0] / bandwidths_[0];
    scaled1_[k] = support_[k][1] / bandwidths_[1];
  }
  log_norm_ = -std::log(static_cast<double>(support_.size())) - std::log(bandwidths_[0]) - std::log(bandwidths_[1]) -
              kLog2Pi;
}

double KdePrior::log_density(const ParamVector& theta) const {
  if (!std::isfinite(theta[0]) || !std::isfinite(theta[1])) return kNegInf;
  const double t0 = theta[0] / bandwidths_[0];
  const double t1 = theta[1] / bandwidths_[1];
  const std::size_t n = scaled0_.size();
  thread_local std::vector<double> dist2;
  dist2.resize(n);
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double a = t0 - scaled0_[k];
    const double b = t1 - scaled1_[k];
    const double d2 = a * a + b * b;
    dist2[k] = d2;
    min_d2 = std::min(min_d2, d2);
  }
  // Sum relative to the nearest kernel so distant queries keep precision.
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += std::exp(-0.5 * (dist2[k] - min_d2));
  return log_norm_ - 0.5 * min_d2 + std::log(sum);
}

ParamVector KdePrior::sample(RandomStream& rng) const {
  const ParamVector& centre = support_[rng.index(support_.size())];
  const double n0 = rng.normal();
  const double n1 = rng.normal();
  return {centre[0] + bandwidths_[0] * n0, centre[1] + bandwidths_[1] * n1};
}

std::string prior_label(const ParameterPrior& prior) {
  return std::visit(
      [](const auto& p) -> std::string {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, KdePrior>)
          return p.label();
        else
          return p.label;
      },
      prior);
}

UniformBoxPrior default_uniform_prior(ModelFamily family) {
  UniformBoxPrior box{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
                      {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()},
                      "noninformative"};
  // Each native parameter is monotone in mean and in COV separately, so the
  // corners of the envelope bound its image.
  for (double m : kEnvelopeMean) {
    for (double c : kEnvelopeCov) {
      const ParamVector p = params_from_mean_cov(family, m, c);
      for (std::size_t i = 0; i < 2; ++i) {
        box.lo[i] = std::min(box.lo[i], p[i]);
        box.hi[i] = std::max(box.hi[i], p[i]);
      }
    }
  }
  return box;
}

ParamVector kde_bandwidths(const std::vector<ParamVector>& samples, int dimension) {
  if (samples.size() < 2) throw std::invalid_argument("kde_bandwidths: need at least two samples");
  if (dimension < 1) throw std::invalid_argument("kde_bandwidths: dimension must be positive");
  const auto n = static_cast<double>(samples.size());
  const double k = dimension;
  const double factor = std::pow(4.0 / (k + 2.0), 1.0 / (k + 4.0)) * std::pow(n, -1.0 / (k + 4.0));
  ParamVector w{};
  for (std::size_t i = 0; i < 2; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s[i] - mean) * (s[i] - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw std::invalid_argument("kde_bandwidths: zero variance in dimension " + std::to_string(i));
    w[i] = factor * sd;
  }
  return w;
}

KdePrior fit_kde_prior(std::vector<ParamVector> samples, std::string label) {
  const ParamVector w = kde_bandwidths(samples, 2);
  return KdePrior(std::move(samples), w, std::move(label));
}

KdePrior build_informative_prior(ModelFamily family, const Dataset& historical, const UniformBoxPrior& pre_prior,
                                 const EnsembleConfig& cfg, std::size_t max_support) {
  if (historical.values.empty()) throw std::invalid_argument("build_informative_prior: empty historical dataset");
  if (max_support == 1) throw std::invalid_argument("build_informative_prior: max_support must be 0 or at least 2");
  if (std::all_of(historical.values.begin(), historical.values.end(),
                  [&](double v) { return v == historical.values.front(); }))
    throw std::invalid_argument("build_informative_prior: historical dataset has zero variance");
  PosteriorChain chain = sample_posterior(family, historical, ParameterPrior(pre_prior), cfg);
  if (max_support == 0 || chain.samples.size() <= max_support)
    return fit_kde_prior(std::move(chain.samples), historical.label);
  const std::size_t stride = (chain.samples.size() + max_support - 1) / max_support;
  std::vector<ParamVector> support;
  support.reserve(chain.samples.size() / stride + 1);
  for (std::size_t k = 0; k < chain.samples.size(); k += stride) support.push_back(chain.samples[k]);
  return fit_kde_prior(std::move(support), historical.label);
}

double log_prior_density(const ParameterPrior& prior, const ParamVector& theta) {
  if (const auto* box = std::get_if<UniformBoxPrior>(&prior))
    return box->contains(theta) ? -std::log(box->volume()) : kNegInf;
  return std::get<KdePrior>(prior).log_density(theta);
}

double prior_density(const ParameterPrior& prior, const ParamVector& theta) {
  return std::exp(log_prior_density(prior, theta));
}

ParamVector prior_sample_one(const ParameterPrior& prior, RandomStream& rng) {
  if (const auto* box = std::get_if<UniformBoxPrior>(&prior)) {
    const double a = rng.uniform(box->lo[0], box->hi[0]);
    const double b = rng.uniform(box->lo[1], box->hi[1]);
    return {a, b};
  }
  return std::get<KdePrior>(prior).sample(rng);
}

std::vector<ParamVector> prior_sample(const ParameterPrior& prior, RandomStream& rng, std::size_t count) {
  if (count == 0) throw std::invalid_argument("prior_sample: count must be at least 1");
  std::vector<ParamVector> out(count);
  for (auto& p : out) p = prior_sample_one(prior, rng);
  return out;
}

const std::array<MaterialSpec, 4>& historical_materials() {
  static const std::array<MaterialSpec, 4> table = {{
      {"ABS-A", 31.9, 39.6, 36.091, 0.059, ModelFamily::Lognormal, 33},
      {"ABS-B", 27.6, 46.8, 34.782, 0.116, ModelFamily::Lognormal, 79},
      {"ABS-C", 30.9, 41.5, 33.831, 0.081, ModelFamily::Lognormal, 13},
      {"ASTM-A7", 28.6, 49.4, 38.197, 0.108, ModelFamily::Normal, 58},
  }};
  return table;
}

const MaterialSpec& material_by_name(std::string_view name) {
  for (const auto& m : historical_materials())
    if (m.name == name) return m;
  throw std::invalid_argument("unknown material: " + std::string(name));
}

Dataset synthesize_historical(const MaterialSpec& material, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {0x4849535455ULL, static_cast<std::uint64_t>(material.n_tests),
                                      static_cast<std::uint64_t>(std::llround(material.mean * 1000.0))}));
  const ParamVector theta = params_from_mean_cov(material.family, material.mean, material.cov);
  return Dataset{sample(material.family, theta, rng, material.n_tests), std::string(material.name)};
}

}  // namespace mmuq
