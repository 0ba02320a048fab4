#pragma once

#include <cstdint>
#include <functional>
#include <ostream>

#include "mmuq/dists.hpp"

namespace mmuq {

/// Plate geometry and material. Units: inches and ksi; delta0 and eta are
/// nondimensional.
struct PlateConfig {
  double b;       // width
  double t;       // thickness
  double sigma0;  // yield strength
  double E;       // elastic modulus
  double delta0;  // initial deflection
  double eta;     // residual-stress zone

  /// Throws std::invalid_argument unless all fields are positive and b > t.
  /// delta0 and eta may be zero (pristine plate).
  void validate() const;
};

/// Mean values of the plate variables; only the yield strength is treated
/// as uncertain.
PlateConfig mean_plate();

double slenderness(const PlateConfig& cfg);

/// Pristine plate: 2/lambda - 1/lambda^2.
double psi_faulkner(double lambda);

/// Strength with residual stress and initial deflection:
/// (2.1/lambda - 0.9/lambda^2)(1 - 0.75 delta0/lambda)(1 - 2 eta t/b).
double psi_carlsen(const PlateConfig& cfg);

/// psi_carlsen with the yield strength replaced by sigma0.
double psi_at(const PlateConfig& cfg, double sigma0);

/// Response for propagation: psi_at for sigma0 > 0, and 0 otherwise (a
/// plate with no yield strength carries no load).
std::function<double(double)> plate_response(const PlateConfig& cfg);

/// Generator of the synthetic yield-strength data.
struct TrueModelSpec {
  ModelFamily family = ModelFamily::Lognormal;
  double mean = 34.782;
  double cov = 0.116;

  ParamVector theta() const;
};

/// n lognormal draws from one stream; the size-n set is a prefix of every
/// larger set under the same seed.
Dataset generate_data(const TrueModelSpec& spec, std::size_t n, std::uint64_t seed);

/// P(psi < threshold) for sigma0 ~ family(theta) with the other plate
/// variables from cfg. Every crossing of psi = threshold is located by
/// bisection (1e-10 in sigma0) and the failure intervals are summed, so
/// the result stays valid where psi is not monotone. Mass at sigma0 <= 0
/// counts as failure.
double pf_semianalytic(ModelFamily family, const ParamVector& theta, double threshold, const PlateConfig& cfg);

struct ResponseStatistics {
  double mean;
  double variance;
  double pf;
};

/// Mean and variance of psi under the true model by quadrature over the
/// standard normal variate, with pf from pf_semianalytic.
ResponseStatistics truth_statistics(const TrueModelSpec& spec, const PlateConfig& cfg, double threshold);

/// CSV `sigma0,psi` on n points spanning [lo, hi].
void write_psi_table(std::ostream& out, const PlateConfig& cfg, double lo, double hi, std::size_t n);

}  // namespace mmuq
