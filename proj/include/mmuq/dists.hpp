#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmuq/random.hpp"

namespace mmuq {

/// The seven candidate parametric families for a positive scalar quantity.
///
/// Native parameterizations (first, second):
///   Gamma            shape k, scale s
///   InverseGaussian  mean mu, shape lambda
///   Logistic         location, scale
///   Loglogistic      location and scale of ln X (ln X ~ Logistic)
///   Lognormal        mean and standard deviation of ln X
///   Normal           mean, standard deviation
///   Weibull          shape k, scale s
enum class ModelFamily { Gamma, InverseGaussian, Logistic, Loglogistic, Lognormal, Normal, Weibull };

inline constexpr std::array<ModelFamily, 7> kAllFamilies = {
    ModelFamily::Gamma,     ModelFamily::InverseGaussian, ModelFamily::Logistic, ModelFamily::Loglogistic,
    ModelFamily::Lognormal, ModelFamily::Normal,          ModelFamily::Weibull};

inline constexpr std::size_t kNumFamilies = kAllFamilies.size();

/// Parameter dimension K of a family (2 for every member of the set).
constexpr int parameter_dimension(ModelFamily) noexcept { return 2; }

constexpr std::size_t family_index(ModelFamily f) noexcept { return static_cast<std::size_t>(f); }

std::string_view family_name(ModelFamily f) noexcept;
std::optional<ModelFamily> family_from_name(std::string_view name) noexcept;
std::array<std::string_view, 2> parameter_names(ModelFamily f) noexcept;

using ParamVector = std::array<double, 2>;

/// Independent scalar observations.
struct Dataset {
  std::vector<double> values;
  std::string label;

  std::size_t size() const noexcept { return values.size(); }
};

/// True when both components are finite and the family's positive
/// parameters are strictly positive.
bool is_valid(ModelFamily family, const ParamVector& theta) noexcept;

/// Throws std::invalid_argument when !is_valid(family, theta).
void require_valid(ModelFamily family, const ParamVector& theta);

/// Log density; -infinity outside the support.
double log_pdf(ModelFamily family, const ParamVector& theta, double x);
double pdf(ModelFamily family, const ParamVector& theta, double x);
double cdf(ModelFamily family, const ParamVector& theta, double x);

double sample_one(ModelFamily family, const ParamVector& theta, RandomStream& rng);
std::vector<double> sample(ModelFamily family, const ParamVector& theta, RandomStream& rng, std::size_t count);

/// Sum of log densities of i.i.d. observations.
double log_likelihood(ModelFamily family, const ParamVector& theta, std::span<const double> data);
double log_likelihood(ModelFamily family, const ParamVector& theta, const Dataset& data);

/// Mean and coefficient of variation of the distribution. Entries are
/// +infinity where the moment does not exist.
struct MeanCov {
  double mean;
  double cov;
};
MeanCov mean_cov(ModelFamily family, const ParamVector& theta);

/// Native parameters of the family member with the given mean and COV.
/// Throws std::invalid_argument for non-positive inputs and for COVs the
/// family cannot represent.
ParamVector params_from_mean_cov(ModelFamily family, double mean, double cov);

/// (log-location, log-scale) of the lognormal with given mean and COV.
ParamVector lognormal_from_mean_cov(double mean, double cov);

}  // namespace mmuq
