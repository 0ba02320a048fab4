#include "mmuq/ensemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mmuq/errors.hpp"
#include "mmuq/parallel.hpp"
#include "special.hpp"

namespace mmuq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-member constants so the N x N_d density table costs a few flops per
// entry. Members are evaluated family by family to keep branches out of
// the inner loops.
struct MemberTable {
  struct Entry {
    double a;
    double inv_b;
    double h;  // family-specific extra term
    double c;  // log normalizer
  };
  std::vector<Entry> entries;
  std::array<std::vector<std::size_t>, kNumFamilies> by_family;

  explicit MemberTable(const DistributionEnsemble& ens) {
    entries.reserve(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const auto& m = ens.members[i];
      require_valid(m.model, m.theta);
      const auto [a, b] = m.theta;
      Entry e{a, 1.0 / b, 0.0, -std::log(b)};
      switch (m.model) {
        case ModelFamily::Normal:
        case ModelFamily::Lognormal: e.c -= detail::kLogSqrt2Pi; break;
        case ModelFamily::Gamma: e.c = -std::lgamma(a) - a * std::log(b); break;
        case ModelFamily::InverseGaussian:
          e.h = b / (2.0 * a * a);
          e.c = 0.5 * std::log(b) - detail::kLogSqrt2Pi;
          break;
        case ModelFamily::Weibull:
          e.h = std::log(b);
          e.c = std::log(a) - std::log(b);
          break;
        default: break;
      }
      entries.push_back(e);
      by_family[family_index(m.model)].push_back(i);
    }
  }

  void log_densities(double x, double* out) const {
    const bool positive = x > 0.0;
    const double lx = positive ? std::log(x) : kNegInf;
    for (std::size_t f = 0; f < kNumFamilies; ++f) {
      const auto family = kAllFamilies[f];
      const auto& idx = by_family[f];
      if (idx.empty()) continue;
      const bool needs_positive = family != ModelFamily::Normal && family != ModelFamily::Logistic;
      if (needs_positive && !positive) {
        for (auto i : idx) out[i] = kNegInf;
        continue;
      }
      switch (family) {
        case ModelFamily::Normal:
          for (auto i : idx) {
            const auto& e = entries[i];
            const double z = (x - e.a) * e.inv_b;
            out[i] = -0.5 * z * z + e.c;
          }
          break;
        case ModelFamily::Logistic:
          for (auto i : idx) {
            const auto& e = entries[i];
            out[i] = detail::log_std_logistic_pdf((x - e.a) * e.inv_b) + e.c;
          }
          break;
        case ModelFamily::Gamma:
          for (auto i : idx) {
            const auto& e = entries[i];
            out[i] = (e.a - 1.0) * lx - x * e.inv_b + e.c;
          }
          break;
        case ModelFamily::InverseGaussian:
          for (auto i : idx) {
            const auto& e = entries[i];
            const double d = x - e.a;
            out[i] = e.c - 1.5 * lx - e.h * d * d / x;
          }
          break;
        case ModelFamily::Loglogistic:
          for (auto i : idx) {
            const auto& e = entries[i];
            out[i] = detail::log_std_logistic_pdf((lx - e.a) * e.inv_b) + e.c - lx;
          }
          break;
        case ModelFamily::Lognormal:
          for (auto i : idx) {
            const auto& e = entries[i];
            const double z = (lx - e.a) * e.inv_b;
            out[i] = -0.5 * z * z + e.c - lx;
          }
          break;
        case ModelFamily::Weibull:
          for (auto i : idx) {
            const auto& e = entries[i];
            const double lr = lx - e.h;
            out[i] = e.c + (e.a - 1.0) * lr - std::exp(e.a * lr);
          }
          break;
      }
    }
  }
};

double log_sum_exp(const double* v, std::size_t n) {
  double m = kNegInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Sums per member, with d = g - g_bar and I = [g < threshold]:
// w, w d, w d^2, w I, w^2, w^2 d, w^2 d^2, w^2 d^3, w^2 d^4, w^2 I.
constexpr std::size_t kSums = 10;

using SumBlock = std::vector<double>;

void add_into(SumBlock& into, const SumBlock& from) {
  for (std::size_t j = 0; j < into.size(); ++j) into[j] += from[j];
}

// Fixed-shape pairwise reduction; the result depends only on the number
// of blocks, never on which thread produced them.
SumBlock reduce_blocks(std::vector<SumBlock>& blocks, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(blocks[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  SumBlock left = reduce_blocks(blocks, lo, mid);
  add_into(left, reduce_blocks(blocks, mid, hi));
  return left;
}

}  // namespace

std::vector<ModelFamily> draw_member_models(const ModelPosteriorProbs& probs, std::size_t n_d, RandomStream& rng) {
  if (n_d == 0) throw std::invalid_argument("draw_member_models: ensemble size must be at least 1");
  if (probs.pi_hat.size() != kNumFamilies)
    throw std::invalid_argument("draw_member_models: expected one probability per model family");
  std::array<double, kNumFamilies> cumulative{};
  double total = 0.0;
  std::size_t last_positive = kNumFamilies;
  for (std::size_t j = 0; j < kNumFamilies; ++j) {
    const double p = probs.pi_hat[j];
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("draw_member_models: invalid probability");
    total += p;
    cumulative[j] = total;
    if (p > 0.0) last_positive = j;
  }
  if (last_positive == kNumFamilies) throw std::invalid_argument("draw_member_models: all probabilities are zero");

  std::vector<ModelFamily> out(n_d);
  for (auto& m : out) {
    const double u = rng.uniform() * total;
    std::size_t j = 0;
    while (j < last_positive && !(u < cumulative[j])) ++j;
    m = kAllFamilies[j];
  }
  return out;
}

DistributionEnsemble assign_member_parameters(std::span<const ModelFamily> models, std::span<const PosteriorChain> chains,
                                              RandomStream& rng, std::string source) {
  std::array<const PosteriorChain*, kNumFamilies> lookup{};
  for (const auto& c : chains)
    if (!c.samples.empty()) lookup[family_index(c.model)] = &c;
  DistributionEnsemble ens;
  ens.source = std::move(source);
  ens.members.reserve(models.size());
  for (auto m : models) {
    const PosteriorChain* chain = lookup[family_index(m)];
    if (chain == nullptr)
      throw std::invalid_argument("assign_member_parameters: no posterior samples for model " +
                                  std::string(family_name(m)));
    ens.members.push_back({m, chain->samples[rng.index(chain->samples.size())]});
  }
  return ens;
}

DistributionEnsemble draw_ensemble(std::span<const PosteriorChain> chains, const ModelPosteriorProbs& probs,
                                   std::size_t n_d, RandomStream& rng, std::string source) {
  if (probs.pi_hat.size() != kNumFamilies)
    throw std::invalid_argument("draw_ensemble: expected one probability per model family");
  for (std::size_t j = 0; j < kNumFamilies; ++j) {
    if (!(probs.pi_hat[j] > 0.0)) continue;
    const bool found = std::any_of(chains.begin(), chains.end(), [&](const PosteriorChain& c) {
      return c.model == kAllFamilies[j] && !c.samples.empty();
    });
    if (!found)
      throw std::invalid_argument("draw_ensemble: model " + std::string(family_name(kAllFamilies[j])) +
                                  " has positive probability but no posterior samples");
  }
  const auto models = draw_member_models(probs, n_d, rng);
  return assign_member_parameters(models, chains, rng, std::move(source));
}

double mixture_log_density(const DistributionEnsemble& ens, double x) {
  if (ens.members.empty()) throw std::invalid_argument("mixture_log_density: empty ensemble");
  std::vector<double> lp(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) lp[i] = log_pdf(ens.members[i].model, ens.members[i].theta, x);
  return log_sum_exp(lp.data(), lp.size()) - std::log(static_cast<double>(ens.size()));
}

double mixture_density(const DistributionEnsemble& ens, double x) { return std::exp(mixture_log_density(ens, x)); }

std::vector<double> sample_mixture(const DistributionEnsemble& ens, RandomStream& rng, std::size_t n) {
  if (ens.members.empty()) throw std::invalid_argument("sample_mixture: empty ensemble");
  if (n == 0) throw std::invalid_argument("sample_mixture: n must be at least 1");
  for (const auto& m : ens.members) require_valid(m.model, m.theta);
  std::vector<double> out(n);
  for (auto& x : out) {
    const auto& m = ens.members[rng.index(ens.size())];
    x = sample_one(m.model, m.theta, rng);
  }
  return out;
}

PropagationResult reweight(const DistributionEnsemble& ens, std::vector<double> x_samples, std::vector<double> g_values,
                           const PropagationOptions& options) {
  if (ens.members.empty()) throw std::invalid_argument("reweight: empty ensemble");
  if (x_samples.empty()) throw std::invalid_argument("reweight: no samples");
  if (x_samples.size() != g_values.size()) throw std::invalid_argument("reweight: x and g lengths differ");
  if (options.chunk_size == 0) throw std::invalid_argument("reweight: chunk_size must be positive");
  for (std::size_t k = 0; k < g_values.size(); ++k)
    if (!std::isfinite(g_values[k]))
      throw ResponseError("non-finite response at sample " + std::to_string(k) + " (x = " +
                          std::to_string(x_samples[k]) + ")");

  const MemberTable table(ens);
  const std::size_t n = x_samples.size();
  const std::size_t nd = ens.size();
  const double log_nd = std::log(static_cast<double>(nd));

  // Centring on the overall mean keeps the second-moment sums well
  // conditioned when the spread of g is small relative to its level.
  double g_bar = 0.0;
  for (double g : g_values) g_bar += g;
  g_bar /= static_cast<double>(n);

  const std::size_t n_chunks = (n + options.chunk_size - 1) / options.chunk_size;
  std::vector<SumBlock> blocks(n_chunks);
  parallel_for(n_chunks, options.workers, [&](std::size_t c) {
    SumBlock acc(nd * kSums, 0.0);
    std::vector<double> lp(nd);
    const std::size_t end = std::min(n, (c + 1) * options.chunk_size);
    for (std::size_t k = c * options.chunk_size; k < end; ++k) {
      table.log_densities(x_samples[k], lp.data());
      const double lq = log_sum_exp(lp.data(), nd) - log_nd;
      if (!std::isfinite(lq))
        throw NumericalError("reweight: sample " + std::to_string(k) + " lies outside every member's support");
      const double d = g_values[k] - g_bar;
      const double ind = g_values[k] < options.threshold ? 1.0 : 0.0;
      const double d2 = d * d;
      for (std::size_t i = 0; i < nd; ++i) {
        const double w = std::exp(lp[i] - lq);
        const double w2 = w * w;
        double* s = &acc[i * kSums];
        s[0] += w;
        s[1] += w * d;
        s[2] += w * d2;
        s[3] += w * ind;
        s[4] += w2;
        s[5] += w2 * d;
        s[6] += w2 * d2;
        s[7] += w2 * d2 * d;
        s[8] += w2 * d2 * d2;
        s[9] += w2 * ind;
      }
    }
    blocks[c] = std::move(acc);
  });
  const SumBlock total = reduce_blocks(blocks, 0, n_chunks);

  const double nn = static_cast<double>(n);
  PropagationResult out;
  out.members.resize(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    const double* s = &total[i * kSums];
    const double w = s[0] / nn;
    const double d1 = s[1] / nn;
    const double d2 = s[2] / nn;
    MemberStatistics& m = out.members[i];
    m.mean_weight = w;
    m.mean = g_bar * w + d1;
    const double e = m.mean - g_bar;
    m.variance = d2 - 2.0 * e * d1 + e * e * w;
    m.pf = s[3] / nn;

    // Sample variances of the per-draw terms w g, w (g - mean)^2 and w I,
    // expanded in the centred sums.
    const double sq_wg = (g_bar * g_bar * s[4] + 2.0 * g_bar * s[5] + s[6]) / nn;
    const double e2 = e * e;
    const double sq_wv = (s[8] - 4.0 * e * s[7] + 6.0 * e2 * s[6] - 4.0 * e2 * e * s[5] + e2 * e2 * s[4]) / nn;
    const double sq_wi = s[9] / nn;
    m.mean_se = std::sqrt(std::max(sq_wg - m.mean * m.mean, 0.0) / nn);
    m.variance_se = std::sqrt(std::max(sq_wv - m.variance * m.variance, 0.0) / nn);
    m.pf_se = std::sqrt(std::max(sq_wi - m.pf * m.pf, 0.0) / nn);
  }
  out.x_samples = std::move(x_samples);
  out.g_values = std::move(g_values);
  return out;
}

PropagationResult propagate(const DistributionEnsemble& ens, const std::function<double(double)>& g, std::size_t n,
                            RandomStream& rng, const PropagationOptions& options) {
  auto xs = sample_mixture(ens, rng, n);
  std::vector<double> gs(n);
  const std::size_t chunk = std::max<std::size_t>(options.chunk_size, 1);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  parallel_for(n_chunks, options.workers, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t k = c * chunk; k < end; ++k) gs[k] = g(xs[k]);
  });
  return reweight(ens, std::move(xs), std::move(gs), options);
}

}  // namespace mmuq
