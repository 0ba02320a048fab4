#include "mmuq/buckling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmuq/format.hpp"
#include "mmuq/random.hpp"
#include "special.hpp"

namespace mmuq {

void PlateConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(b) || !positive(t) || !positive(sigma0) || !positive(E))
    throw std::invalid_argument("PlateConfig: b, t, sigma0 and E must be positive");
  if (!(std::isfinite(delta0) && delta0 >= 0.0) || !(std::isfinite(eta) && eta >= 0.0))
    throw std::invalid_argument("PlateConfig: delta0 and eta must be non-negative");
  if (!(b > t)) throw std::invalid_argument("PlateConfig: width must exceed thickness");
}

PlateConfig mean_plate() {
  // Nominal 36 x 0.75 in plate and E = 29000 ksi scaled by their mean biases.
  return {0.992 * 36.0, 1.05 * 0.75, 34.782, 0.987 * 29000.0, 0.35, 5.25};
}

double slenderness(const PlateConfig& cfg) { return (cfg.b / cfg.t) * std::sqrt(cfg.sigma0 / cfg.E); }

double psi_faulkner(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("psi_faulkner: slenderness must be positive");
  return 2.0 / lambda - 1.0 / (lambda * lambda);
}

double psi_carlsen(const PlateConfig& cfg) {
  const double lambda = slenderness(cfg);
  return (2.1 / lambda - 0.9 / (lambda * lambda)) * (1.0 - 0.75 * cfg.delta0 / lambda) *
         (1.0 - 2.0 * cfg.eta * cfg.t / cfg.b);
}

double psi_at(const PlateConfig& cfg, double sigma0) {
  PlateConfig c = cfg;
  c.sigma0 = sigma0;
  return psi_carlsen(c);
}

std::function<double(double)> plate_response(const PlateConfig& cfg) {
  cfg.validate();
  return [cfg](double sigma0) { return sigma0 > 0.0 ? psi_at(cfg, sigma0) : 0.0; };
}

ParamVector TrueModelSpec::theta() const { return params_from_mean_cov(family, mean, cov); }

Dataset generate_data(const TrueModelSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_data: n must be at least 1");
  RandomStream rng(seed);
  Dataset d;
  d.values = sample(spec.family, spec.theta(), rng, n);
  d.label = "synthetic n=" + std::to_string(n);
  return d;
}

double pf_semianalytic(ModelFamily family, const ParamVector& theta, double threshold, const PlateConfig& cfg) {
  require_valid(family, theta);
  cfg.validate();
  auto excess = [&](double s) { return psi_at(cfg, s) - threshold; };

  // psi depends on sigma0 only through sqrt(sigma0), so a log grid spanning
  // many decades brackets every crossing of a physically meaningful plate.
  constexpr double kLo = 1e-6;
  constexpr double kHi = 1e8;
  constexpr std::size_t kScan = 8000;
  const double ratio = std::pow(kHi / kLo, 1.0 / static_cast<double>(kScan));

  double pf = cdf(family, theta, 0.0);
  double s_prev = kLo;
  double f_prev = excess(s_prev);
  // Failure below the scan range.
  double fail_start = f_prev < 0.0 ? 0.0 : -1.0;
  for (std::size_t k = 1; k <= kScan; ++k) {
    const double s = k == kScan ? kHi : kLo * std::pow(ratio, static_cast<double>(k));
    const double f = excess(s);
    if ((f < 0.0) != (f_prev < 0.0)) {
      double a = s_prev, b = s;
      const bool rising_into_failure = f < 0.0;
      while (b - a > 1e-10 * std::max(1.0, a)) {
        const double m = 0.5 * (a + b);
        if ((excess(m) < 0.0) == rising_into_failure)
          b = m;
        else
          a = m;
      }
      const double root = 0.5 * (a + b);
      if (rising_into_failure) {
        fail_start = root;
      } else {
        pf += cdf(family, theta, root) - (fail_start > 0.0 ? cdf(family, theta, fail_start) : cdf(family, theta, 0.0));
        fail_start = -1.0;
      }
    }
    s_prev = s;
    f_prev = f;
  }
  if (fail_start >= 0.0)
    pf += 1.0 - (fail_start > 0.0 ? cdf(family, theta, fail_start) : cdf(family, theta, 0.0));
  return std::clamp(pf, 0.0, 1.0);
}

ResponseStatistics truth_statistics(const TrueModelSpec& spec, const PlateConfig& cfg, double threshold) {
  if (spec.family != ModelFamily::Lognormal)
    throw std::invalid_argument("truth_statistics: quadrature assumes a lognormal true model");
  const auto [lam, zeta] = spec.theta();
  // Trapezoid over z in [-12, 12]; the integrand is smooth and the tails
  // are negligible, so this is accurate to near machine precision.
  constexpr std::size_t kPoints = 24001;
  const double h = 24.0 / static_cast<double>(kPoints - 1);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < kPoints; ++k) {
    const double z = -12.0 + h * static_cast<double>(k);
    const double w = std::exp(-0.5 * z * z - detail::kLogSqrt2Pi) * h * ((k == 0 || k + 1 == kPoints) ? 0.5 : 1.0);
    const double psi = psi_at(cfg, std::exp(lam + zeta * z));
    m1 += w * psi;
    m2 += w * psi * psi;
  }
  return {m1, m2 - m1 * m1, pf_semianalytic(spec.family, spec.theta(), threshold, cfg)};
}

void write_psi_table(std::ostream& out, const PlateConfig& cfg, double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("write_psi_table: need n >= 2 and 0 < lo < hi");
  out << "sigma0,psi\n";
  for (std::size_t k = 0; k < n; ++k) {
    const double s = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    out << format_double(s) << ',' << format_double(psi_at(cfg, s)) << '\n';
  }
}

}  // namespace mmuq
