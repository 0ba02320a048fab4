#include "mmuq/evidence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mmuq/errors.hpp"

namespace mmuq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  const double lse = log_sum_exp(log_w);
  std::vector<double> out(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) out[i] = std::exp(log_w[i] - lse);
  return out;
}

using Point2 = std::array<double, 2>;

struct SimplexResult {
  Point2 x;
  double f;
  int iterations;
};

// Nelder-Mead minimization in two dimensions.
SimplexResult nelder_mead(const std::function<double(const Point2&)>& f, Point2 start, Point2 step, int max_iter,
                          double rel_tol) {
  std::array<Point2, 3> pts = {start, start, start};
  pts[1][0] += step[0];
  pts[2][1] += step[1];
  std::array<double, 3> val{};
  for (std::size_t i = 0; i < 3; ++i) val[i] = f(pts[i]);

  int it = 0;
  for (; it < max_iter; ++it) {
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order[0];
    const std::size_t mid = order[1];
    const std::size_t worst = order[2];
    if (std::isfinite(val[worst]) &&
        std::fabs(val[worst] - val[best]) <= rel_tol * (std::fabs(val[best]) + 1e-300))
      break;

    Point2 centroid;
    for (std::size_t d = 0; d < 2; ++d) centroid[d] = 0.5 * (pts[best][d] + pts[mid][d]);
    auto along = [&](double t) {
      Point2 p;
      for (std::size_t d = 0; d < 2; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return p;
    };

    const Point2 reflected = along(-1.0);
    const double f_reflected = f(reflected);
    if (f_reflected < val[best]) {
      const Point2 expanded = along(-2.0);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        pts[worst] = expanded;
        val[worst] = f_expanded;
      } else {
        pts[worst] = reflected;
        val[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < val[mid]) {
      pts[worst] = reflected;
      val[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < val[worst];
    const Point2 contracted = along(outside ? -0.5 : 0.5);
    const double f_contracted = f(contracted);
    if (f_contracted < (outside ? f_reflected : val[worst])) {
      pts[worst] = contracted;
      val[worst] = f_contracted;
      continue;
    }
    for (std::size_t i : {mid, worst}) {
      for (std::size_t d = 0; d < 2; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
      val[i] = f(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[best], val[best], it};
}

bool first_parameter_positive(ModelFamily family) {
  return family == ModelFamily::Gamma || family == ModelFamily::InverseGaussian || family == ModelFamily::Weibull;
}

}  // namespace

void ModelPriorProbs::validate() const {
  if (pi.empty()) throw std::invalid_argument("ModelPriorProbs: empty");
  double sum = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("ModelPriorProbs: negative or non-finite entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12) throw std::invalid_argument("ModelPriorProbs: probabilities must sum to 1");
}

EvidenceEstimate estimate_log_evidence(ModelFamily family, const Dataset& data, const ParameterPrior& prior,
                                       std::size_t n_k, RandomStream& rng) {
  if (n_k == 0) throw std::invalid_argument("estimate_log_evidence: n_k must be at least 1");
  if (data.values.empty()) throw std::invalid_argument("estimate_log_evidence: empty dataset");
  std::vector<double> ll(n_k);
  std::size_t finite = 0;
  for (auto& v : ll) {
    const ParamVector theta = prior_sample_one(prior, rng);
    v = is_valid(family, theta) ? log_likelihood(family, theta, data) : kNegInf;
    if (std::isfinite(v)) ++finite;
  }
  if (finite == 0)
    throw EvidenceError("every prior draw has zero likelihood: model " + std::string(family_name(family)) +
                        ", prior " + prior_label(prior));
  const double peak = *std::max_element(ll.begin(), ll.end());
  const auto n = static_cast<double>(n_k);
  double sum = 0.0;
  for (double v : ll) sum += std::exp(v - peak);
  const double mean = sum / n;
  double se = std::numeric_limits<double>::infinity();
  if (n_k > 1) {
    double ss = 0.0;
    for (double v : ll) {
      const double d = std::exp(v - peak) - mean;
      ss += d * d;
    }
    se = std::sqrt(ss / (n - 1.0) / n) / mean;
  }
  return {peak + std::log(mean), se, n_k, finite};
}

double log_evidence_mc(ModelFamily family, const Dataset& data, const ParameterPrior& prior, std::size_t n_k,
                       RandomStream& rng) {
  return estimate_log_evidence(family, data, prior, n_k, rng).log_evidence;
}

ModelPosteriorProbs model_posteriors(std::span<const double> log_evidence, const ModelPriorProbs& prior) {
  if (log_evidence.size() != prior.pi.size())
    throw std::invalid_argument("model_posteriors: log-evidence and prior lengths differ");
  prior.validate();
  std::vector<double> log_w(log_evidence.size());
  bool any = false;
  for (std::size_t j = 0; j < log_w.size(); ++j) {
    log_w[j] = prior.pi[j] > 0.0 ? log_evidence[j] + std::log(prior.pi[j]) : kNegInf;
    any = any || std::isfinite(log_w[j]);
  }
  if (!any) throw EvidenceError("model_posteriors: no model has both positive prior and finite evidence");
  return {normalize_log_weights(log_w), std::vector<double>(log_evidence.begin(), log_evidence.end())};
}

MleResult maximize_likelihood(ModelFamily family, const Dataset& data) {
  const auto& x = data.values;
  if (x.size() < 2) throw OptimizationError("maximize_likelihood: need at least two observations");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) throw OptimizationError("maximize_likelihood: zero-variance data");

  ParamVector start;
  if (family == ModelFamily::Normal)
    start = {mean, sd};
  else if (family == ModelFamily::Logistic)
    start = {mean, sd * std::sqrt(3.0) / std::numbers::pi};
  else
    start = params_from_mean_cov(family, mean, sd / mean);

  const bool log_first = first_parameter_positive(family);
  auto to_native = [&](const Point2& u) -> ParamVector {
    return {log_first ? std::exp(u[0]) : u[0], std::exp(u[1])};
  };
  auto objective = [&](const Point2& u) {
    const ParamVector theta = to_native(u);
    if (!is_valid(family, theta)) return std::numeric_limits<double>::infinity();
    const double ll = log_likelihood(family, theta, data);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  Point2 u0 = {log_first ? std::log(start[0]) : start[0], std::log(start[1])};
  const Point2 step = {log_first ? 0.1 : 0.1 * sd, 0.1};
  SimplexResult r = nelder_mead(objective, u0, step, 500, 1e-10);
  int iterations = r.iterations;
  // Restart from the optimum to escape a collapsed simplex.
  SimplexResult again = nelder_mead(objective, r.x, {step[0] * 0.1, step[1] * 0.1}, 500, 1e-10);
  iterations += again.iterations;
  if (again.f <= r.f) r = again;
  if (!std::isfinite(r.f))
    throw OptimizationError("maximize_likelihood: no finite optimum for " + std::string(family_name(family)));
  return {to_native(r.x), -r.f, iterations};
}

double bic_from(double max_log_likelihood, int k, std::size_t n) {
  return -2.0 * max_log_likelihood + k * std::log(static_cast<double>(n));
}

double aic(ModelFamily family, const Dataset& data) {
  return aic_from(maximize_likelihood(family, data).max_log_likelihood, parameter_dimension(family));
}

double bic(ModelFamily family, const Dataset& data) {
  return bic_from(maximize_likelihood(family, data).max_log_likelihood, parameter_dimension(family), data.size());
}

std::vector<double> aic_weights(std::span<const double> aics) {
  if (aics.empty()) return {};
  const double lo = *std::min_element(aics.begin(), aics.end());
  std::vector<double> log_w(aics.size());
  for (std::size_t j = 0; j < aics.size(); ++j) log_w[j] = -0.5 * (aics[j] - lo);
  return normalize_log_weights(log_w);
}

std::vector<double> bic_weights(std::span<const double> bics, const ModelPriorProbs& prior) {
  if (bics.size() != prior.pi.size()) throw std::invalid_argument("bic_weights: lengths differ");
  if (bics.empty()) return {};
  const double lo = *std::min_element(bics.begin(), bics.end());
  std::vector<double> log_w(bics.size());
  for (std::size_t j = 0; j < bics.size(); ++j)
    log_w[j] = prior.pi[j] > 0.0 ? -0.5 * (bics[j] - lo) + std::log(prior.pi[j]) : kNegInf;
  return normalize_log_weights(log_w);
}

ModelPriorProbs savvy_prior(std::span<const int> dimensions, std::size_t n) {
  if (dimensions.empty() || n == 0) throw std::invalid_argument("savvy_prior: need models and n >= 1");
  const double ln_n = std::log(static_cast<double>(n));
  std::vector<double> log_w(dimensions.size());
  for (std::size_t j = 0; j < dimensions.size(); ++j) log_w[j] = 0.5 * dimensions[j] * ln_n - dimensions[j];
  return {normalize_log_weights(log_w)};
}

ModelPriorProbs uniform_model_prior(std::size_t m) {
  if (m == 0) throw std::invalid_argument("uniform_model_prior: m must be positive");
  return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

ModelPriorProbs concentrated_model_prior(ModelFamily favoured, double favoured_mass) {
  if (!(favoured_mass >= 0.0 && favoured_mass <= 1.0))
    throw std::invalid_argument("concentrated_model_prior: mass must lie in [0, 1]");
  const double rest = (1.0 - favoured_mass) / static_cast<double>(kNumFamilies - 1);
  std::vector<double> pi(kNumFamilies, rest);
  pi[family_index(favoured)] = favoured_mass;
  return {pi};
}

}  // namespace mmuq
