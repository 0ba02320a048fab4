#include "mmuq/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "special.hpp"

namespace mmuq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();
using detail::kLogSqrt2Pi;

// Policy that reports domain problems as NaN instead of throwing; arguments
// are validated before the call.
using QuietPolicy = boost::math::policies::policy<boost::math::policies::domain_error<boost::math::policies::ignore_error>,
                                                  boost::math::policies::overflow_error<boost::math::policies::ignore_error>>;

// Marsaglia-Tsang gamma variate with unit scale.
double sample_std_gamma(double shape, RandomStream& rng) {
  if (shape < 1.0) {
    const double g = sample_std_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

// Michael-Schucany-Haas transformation.
double sample_inverse_gaussian(double mu, double lambda, RandomStream& rng) {
  const double nu = rng.normal();
  const double y = nu * nu;
  const double a = mu * y / (2.0 * lambda);
  const double x = mu * (1.0 + a - std::sqrt(a * (2.0 + a)));
  const double u = rng.uniform();
  return u <= mu / (mu + x) ? x : mu * mu / x;
}

double loglogistic_mean_factor(double beta) {
  // E[X] / exp(location) = pi*beta / sin(pi*beta), beta < 1.
  if (beta < 1e-8) return 1.0 + std::pow(std::numbers::pi * beta, 2) / 6.0;
  const double pb = std::numbers::pi * beta;
  return pb / std::sin(pb);
}

double loglogistic_cov(double beta) {
  if (beta >= 0.5) return kInf;
  const double r = loglogistic_mean_factor(2.0 * beta) / std::pow(loglogistic_mean_factor(beta), 2);
  return std::sqrt(std::max(r - 1.0, 0.0));
}

double weibull_cov(double shape) {
  const double g1 = std::lgamma(1.0 + 1.0 / shape);
  const double g2 = std::lgamma(1.0 + 2.0 / shape);
  return std::sqrt(std::expm1(g2 - 2.0 * g1));
}

// Bisection on a monotone function over [lo, hi] (log-spaced when requested).
template <typename F>
double bisect(F&& f, double lo, double hi, double target, bool increasing, bool log_space) {
  for (int it = 0; it < 200; ++it) {
    const double mid = log_space ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double v = f(mid);
    if ((v < target) == increasing)
      lo = mid;
    else
      hi = mid;
    if ((hi - lo) <= 1e-15 * std::fabs(mid)) break;
  }
  return log_space ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
}

}  // namespace

std::string_view family_name(ModelFamily f) noexcept {
  switch (f) {
    case ModelFamily::Gamma: return "Gamma";
    case ModelFamily::InverseGaussian: return "InverseGaussian";
    case ModelFamily::Logistic: return "Logistic";
    case ModelFamily::Loglogistic: return "Loglogistic";
    case ModelFamily::Lognormal: return "Lognormal";
    case ModelFamily::Normal: return "Normal";
    case ModelFamily::Weibull: return "Weibull";
  }
  return "?";
}

std::optional<ModelFamily> family_from_name(std::string_view name) noexcept {
  for (auto f : kAllFamilies)
    if (family_name(f) == name) return f;
  return std::nullopt;
}

std::array<std::string_view, 2> parameter_names(ModelFamily f) noexcept {
  switch (f) {
    case ModelFamily::Gamma: return {"shape", "scale"};
    case ModelFamily::InverseGaussian: return {"mean", "shape"};
    case ModelFamily::Logistic: return {"location", "scale"};
    case ModelFamily::Loglogistic: return {"log_location", "log_scale"};
    case ModelFamily::Lognormal: return {"log_mean", "log_sd"};
    case ModelFamily::Normal: return {"mean", "sd"};
    case ModelFamily::Weibull: return {"shape", "scale"};
  }
  return {"?", "?"};
}

bool is_valid(ModelFamily family, const ParamVector& theta) noexcept {
  if (!std::isfinite(theta[0]) || !std::isfinite(theta[1]) || theta[1] <= 0.0) return false;
  switch (family) {
    case ModelFamily::Gamma:
    case ModelFamily::InverseGaussian:
    case ModelFamily::Weibull: return theta[0] > 0.0;
    default: return true;
  }
}

void require_valid(ModelFamily family, const ParamVector& theta) {
  if (!is_valid(family, theta))
    throw std::invalid_argument("invalid parameters for " + std::string(family_name(family)) + ": (" +
                                std::to_string(theta[0]) + ", " + std::to_string(theta[1]) + ")");
}

double log_pdf(ModelFamily family, const ParamVector& theta, double x) {
  require_valid(family, theta);
  const auto [a, b] = theta;
  switch (family) {
    case ModelFamily::Normal: {
      const double z = (x - a) / b;
      return -0.5 * z * z - std::log(b) - kLogSqrt2Pi;
    }
    case ModelFamily::Logistic: return detail::log_std_logistic_pdf((x - a) / b) - std::log(b);
    default: break;
  }
  if (!(x > 0.0)) return kNegInf;
  const double lx = std::log(x);
  switch (family) {
    case ModelFamily::Gamma: return (a - 1.0) * lx - x / b - std::lgamma(a) - a * std::log(b);
    case ModelFamily::InverseGaussian: {
      const double d = x - a;
      return 0.5 * (std::log(b) - 3.0 * lx) - kLogSqrt2Pi - b * d * d / (2.0 * a * a * x);
    }
    case ModelFamily::Loglogistic: return detail::log_std_logistic_pdf((lx - a) / b) - std::log(b) - lx;
    case ModelFamily::Lognormal: {
      const double z = (lx - a) / b;
      return -0.5 * z * z - std::log(b) - kLogSqrt2Pi - lx;
    }
    case ModelFamily::Weibull: {
      const double lr = lx - std::log(b);
      return std::log(a) - std::log(b) + (a - 1.0) * lr - std::exp(a * lr);
    }
    default: break;
  }
  return kNegInf;
}

double pdf(ModelFamily family, const ParamVector& theta, double x) { return std::exp(log_pdf(family, theta, x)); }

double cdf(ModelFamily family, const ParamVector& theta, double x) {
  require_valid(family, theta);
  const auto [a, b] = theta;
  switch (family) {
    case ModelFamily::Normal: return detail::normal_cdf((x - a) / b);
    case ModelFamily::Logistic: return 1.0 / (1.0 + std::exp(-(x - a) / b));
    default: break;
  }
  if (!(x > 0.0)) return 0.0;
  switch (family) {
    case ModelFamily::Gamma: {
      const double r = boost::math::gamma_p(a, x / b, QuietPolicy());
      return std::isfinite(r) ? r : 1.0;
    }
    case ModelFamily::InverseGaussian: {
      const double s = std::sqrt(b / x);
      const double second = std::exp(2.0 * b / a + detail::log_normal_cdf(-s * (x / a + 1.0)));
      // Above the mean, work with the survival function so the result
      // approaches 1 monotonically instead of jittering at the last bit.
      if (x > a) return std::clamp(1.0 - (detail::normal_cdf(-s * (x / a - 1.0)) - second), 0.0, 1.0);
      return std::clamp(detail::normal_cdf(s * (x / a - 1.0)) + second, 0.0, 1.0);
    }
    case ModelFamily::Loglogistic: return 1.0 / (1.0 + std::exp(-(std::log(x) - a) / b));
    case ModelFamily::Lognormal: return detail::normal_cdf((std::log(x) - a) / b);
    case ModelFamily::Weibull: return -std::expm1(-std::pow(x / b, a));
    default: break;
  }
  return 0.0;
}

double sample_one(ModelFamily family, const ParamVector& theta, RandomStream& rng) {
  const auto [a, b] = theta;
  switch (family) {
    case ModelFamily::Normal: return a + b * rng.normal();
    case ModelFamily::Lognormal: return std::exp(a + b * rng.normal());
    case ModelFamily::Gamma: return b * sample_std_gamma(a, rng);
    case ModelFamily::InverseGaussian: return sample_inverse_gaussian(a, b, rng);
    case ModelFamily::Logistic: {
      const double u = rng.uniform();
      return a + b * (std::log(u) - std::log1p(-u));
    }
    case ModelFamily::Loglogistic: {
      const double u = rng.uniform();
      return std::exp(a + b * (std::log(u) - std::log1p(-u)));
    }
    case ModelFamily::Weibull: return b * std::pow(-std::log(rng.uniform()), 1.0 / a);
  }
  return 0.0;
}

std::vector<double> sample(ModelFamily family, const ParamVector& theta, RandomStream& rng, std::size_t count) {
  require_valid(family, theta);
  if (count == 0) throw std::invalid_argument("sample: count must be at least 1");
  std::vector<double> out(count);
  for (auto& v : out) v = sample_one(family, theta, rng);
  return out;
}

double log_likelihood(ModelFamily family, const ParamVector& theta, std::span<const double> data) {
  require_valid(family, theta);
  if (data.empty()) throw std::invalid_argument("log_likelihood: empty dataset");
  const auto [a, b] = theta;
  const auto n = static_cast<double>(data.size());
  double acc = 0.0;
  switch (family) {
    case ModelFamily::Normal: {
      for (double x : data) {
        const double z = (x - a) / b;
        acc += z * z;
      }
      return -0.5 * acc - n * (std::log(b) + kLogSqrt2Pi);
    }
    case ModelFamily::Logistic: {
      for (double x : data) acc += detail::log_std_logistic_pdf((x - a) / b);
      return acc - n * std::log(b);
    }
    default: break;
  }
  for (double x : data)
    if (!(x > 0.0)) return kNegInf;
  switch (family) {
    case ModelFamily::Gamma: {
      double sum_log = 0.0;
      double sum = 0.0;
      for (double x : data) {
        sum_log += std::log(x);
        sum += x;
      }
      return (a - 1.0) * sum_log - sum / b - n * (std::lgamma(a) + a * std::log(b));
    }
    case ModelFamily::InverseGaussian: {
      double sum_log = 0.0;
      for (double x : data) {
        const double d = x - a;
        sum_log += std::log(x);
        acc += d * d / x;
      }
      return 0.5 * n * std::log(b) - 1.5 * sum_log - n * kLogSqrt2Pi - b * acc / (2.0 * a * a);
    }
    case ModelFamily::Loglogistic: {
      for (double x : data) {
        const double lx = std::log(x);
        acc += detail::log_std_logistic_pdf((lx - a) / b) - lx;
      }
      return acc - n * std::log(b);
    }
    case ModelFamily::Lognormal: {
      double sum_log = 0.0;
      for (double x : data) {
        const double lx = std::log(x);
        const double z = (lx - a) / b;
        sum_log += lx;
        acc += z * z;
      }
      return -0.5 * acc - sum_log - n * (std::log(b) + kLogSqrt2Pi);
    }
    case ModelFamily::Weibull: {
      const double ls = std::log(b);
      double sum_lr = 0.0;
      for (double x : data) {
        const double lr = std::log(x) - ls;
        sum_lr += lr;
        acc += std::exp(a * lr);
      }
      return n * (std::log(a) - ls) + (a - 1.0) * sum_lr - acc;
    }
    default: break;
  }
  return kNegInf;
}

double log_likelihood(ModelFamily family, const ParamVector& theta, const Dataset& data) {
  return log_likelihood(family, theta, std::span<const double>(data.values));
}

MeanCov mean_cov(ModelFamily family, const ParamVector& theta) {
  require_valid(family, theta);
  const auto [a, b] = theta;
  switch (family) {
    case ModelFamily::Normal: return {a, b / a};
    case ModelFamily::Logistic: return {a, b * std::numbers::pi / std::sqrt(3.0) / a};
    case ModelFamily::Lognormal: return {std::exp(a + 0.5 * b * b), std::sqrt(std::expm1(b * b))};
    case ModelFamily::Gamma: return {a * b, 1.0 / std::sqrt(a)};
    case ModelFamily::InverseGaussian: return {a, std::sqrt(a / b)};
    case ModelFamily::Loglogistic:
      return {b < 1.0 ? std::exp(a) * loglogistic_mean_factor(b) : kInf, loglogistic_cov(b)};
    case ModelFamily::Weibull: return {b * std::exp(std::lgamma(1.0 + 1.0 / a)), weibull_cov(a)};
  }
  return {kInf, kInf};
}

ParamVector lognormal_from_mean_cov(double mean, double cov) {
  if (!(mean > 0.0) || !(cov > 0.0)) throw std::invalid_argument("lognormal_from_mean_cov: mean and cov must be positive");
  const double zeta2 = std::log1p(cov * cov);
  return {std::log(mean) - 0.5 * zeta2, std::sqrt(zeta2)};
}

ParamVector params_from_mean_cov(ModelFamily family, double mean, double cov) {
  if (!(mean > 0.0) || !(cov > 0.0) || !std::isfinite(mean) || !std::isfinite(cov))
    throw std::invalid_argument("params_from_mean_cov: mean and cov must be positive and finite");
  const double sd = mean * cov;
  switch (family) {
    case ModelFamily::Normal: return {mean, sd};
    case ModelFamily::Logistic: return {mean, sd * std::sqrt(3.0) / std::numbers::pi};
    case ModelFamily::Lognormal: return lognormal_from_mean_cov(mean, cov);
    case ModelFamily::Gamma: {
      const double k = 1.0 / (cov * cov);
      return {k, mean / k};
    }
    case ModelFamily::InverseGaussian: return {mean, mean / (cov * cov)};
    case ModelFamily::Loglogistic: {
      const double beta = bisect(loglogistic_cov, 1e-12, 0.5, cov, true, true);
      return {std::log(mean) - std::log(loglogistic_mean_factor(beta)), beta};
    }
    case ModelFamily::Weibull: {
      if (cov > 1e3) throw std::invalid_argument("params_from_mean_cov: Weibull COV out of range");
      const double k = bisect(weibull_cov, 1e-2, 1e7, cov, false, true);
      return {k, mean / std::exp(std::lgamma(1.0 + 1.0 / k))};
    }
  }
  return {mean, sd};
}

}  // namespace mmuq
