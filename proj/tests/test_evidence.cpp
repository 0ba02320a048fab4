#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "mmuq/errors.hpp"
#include "mmuq/evidence.hpp"
#include "mmuq/priors.hpp"
#include "mmuq/random.hpp"
#include "support.hpp"

using namespace mmuq;

namespace {

constexpr std::size_t kLN = family_index(ModelFamily::Lognormal);

// log of (1/volume) * double integral of the Normal likelihood over the box.
double quadrature_log_evidence(const Dataset& d, const UniformBoxPrior& box) {
  constexpr int kMu = 4001, kSigma = 41;
  const double h0 = (box.hi[0] - box.lo[0]) / (kMu - 1);
  const double h1 = (box.hi[1] - box.lo[1]) / (kSigma - 1);
  std::vector<double> ll;
  std::vector<double> w;
  for (int i = 0; i < kMu; ++i)
    for (int j = 0; j < kSigma; ++j) {
      ll.push_back(log_likelihood(ModelFamily::Normal, {box.lo[0] + h0 * i, box.lo[1] + h1 * j}, d));
      w.push_back(((i == 0 || i == kMu - 1) ? 0.5 : 1.0) * ((j == 0 || j == kSigma - 1) ? 0.5 : 1.0));
    }
  const double mx = *std::max_element(ll.begin(), ll.end());
  double s = 0.0;
  for (std::size_t k = 0; k < ll.size(); ++k) s += w[k] * std::exp(ll[k] - mx);
  return mx + std::log(s * h0 * h1 / box.volume());
}

std::vector<double> random_probs(RandomStream& rng, std::size_t m) {
  std::vector<double> p(m);
  for (auto& v : p) v = rng.uniform();
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("Monte Carlo evidence matches quadrature") {
  RandomStream data_rng(10);
  const Dataset d{sample(ModelFamily::Normal, {35.0, 3.0}, data_rng, 10), "normal-10"};
  const UniformBoxPrior box{{20.0, 2.99}, {60.0, 3.01}, "flat-mu"};
  const ParameterPrior prior = box;
  const double truth = quadrature_log_evidence(d, box);

  RandomStream rng(1);
  const auto est = estimate_log_evidence(ModelFamily::Normal, d, prior, 10000, rng);
  CHECK(est.n_draws == 10000);
  CHECK(est.n_finite == 10000);
  CHECK(std::fabs(est.log_evidence - truth) < 3.0 * est.std_error);

  SUBCASE("duplicated data sharpens the likelihood and lowers the evidence") {
    Dataset dd = d;
    dd.values.insert(dd.values.end(), d.values.begin(), d.values.end());
    const double truth2 = quadrature_log_evidence(dd, box);
    RandomStream rng2(2);
    const auto est2 = estimate_log_evidence(ModelFamily::Normal, dd, prior, 10000, rng2);
    CHECK(truth2 < truth);
    CHECK(est2.log_evidence < est.log_evidence);
    CHECK(std::fabs(est2.log_evidence - truth2) < 3.0 * est2.std_error);
  }
}

TEST_CASE("single-draw evidence is the log-likelihood of that draw") {
  const Dataset d{{33.0, 36.0, 35.5}, "three"};
  const ParameterPrior prior = default_uniform_prior(ModelFamily::Normal);
  RandomStream a(4), b(4);
  const double ev = log_evidence_mc(ModelFamily::Normal, d, prior, 1, a);
  CHECK(ev == log_likelihood(ModelFamily::Normal, prior_sample_one(prior, b), d));
  RandomStream c(4);
  CHECK(std::isinf(estimate_log_evidence(ModelFamily::Normal, d, prior, 1, c).std_error));
}

TEST_CASE("estimator spread halves when n_k quadruples") {
  RandomStream data_rng(3);
  const Dataset d{sample(ModelFamily::Lognormal, lognormal_from_mean_cov(34.782, 0.116), data_rng, 10), "ln-10"};
  const ParameterPrior prior = default_uniform_prior(ModelFamily::Lognormal);
  auto spread = [&](std::size_t n_k, std::uint64_t tag) {
    std::vector<double> v;
    for (std::uint64_t r = 0; r < 50; ++r) {
      RandomStream rng(derive_seed(tag, {r}));
      v.push_back(log_evidence_mc(ModelFamily::Lognormal, d, prior, n_k, rng));
    }
    return std::sqrt(testing::variance(v));
  };
  const double ratio = spread(2000, 1) / spread(8000, 2);
  CAPTURE(ratio);
  CHECK(ratio > 2.0 * 0.7);
  CHECK(ratio < 2.0 * 1.3);
}

TEST_CASE("evidence errors") {
  const ParameterPrior prior = default_uniform_prior(ModelFamily::Lognormal);
  RandomStream rng(1);
  const Dataset negative{{-2.0, 30.0}, "negative"};
  CHECK_THROWS_AS(log_evidence_mc(ModelFamily::Lognormal, negative, prior, 100, rng), EvidenceError);
  try {
    log_evidence_mc(ModelFamily::Lognormal, negative, prior, 100, rng);
  } catch (const EvidenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("Lognormal") != std::string::npos);
    CHECK(msg.find("noninformative") != std::string::npos);
  }
  CHECK_THROWS_AS(log_evidence_mc(ModelFamily::Lognormal, negative, prior, 0, rng), std::invalid_argument);
}

TEST_CASE("model posteriors") {
  const auto uniform = uniform_model_prior(7);
  SUBCASE("equal evidences return the prior") {
    const std::vector<double> ev(7, -123.4);
    const auto post = model_posteriors(ev, uniform);
    for (double p : post.pi_hat) CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
    const auto strong = concentrated_model_prior(ModelFamily::Lognormal);
    const auto post2 = model_posteriors(ev, strong);
    CHECK(post2.pi_hat[kLN] == doctest::Approx(0.9).epsilon(1e-14));
    for (std::size_t j = 0; j < 7; ++j)
      if (j != kLN) CHECK(post2.pi_hat[j] == doctest::Approx(0.1 / 6.0).epsilon(1e-13));
  }
  SUBCASE("ln 6 evidence advantage") {
    std::vector<double> ev(7, 0.0);
    ev[kLN] = std::log(6.0);
    CHECK(model_posteriors(ev, uniform).pi_hat[kLN] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("shift invariance, normalization and range") {
    RandomStream rng(5);
    for (int r = 0; r < 20; ++r) {
      std::vector<double> ev(7);
      for (auto& v : ev) v = -1000.0 + 50.0 * rng.normal();
      ModelPriorProbs prior{random_probs(rng, 7)};
      const auto a = model_posteriors(ev, prior);
      for (auto& v : ev) v += 12345.678;
      const auto b = model_posteriors(ev, prior);
      double sum = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        CHECK(a.pi_hat[j] == doctest::Approx(b.pi_hat[j]).epsilon(1e-9));
        CHECK(a.pi_hat[j] >= 0.0);
        CHECK(a.pi_hat[j] <= 1.0);
        sum += a.pi_hat[j];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("no model with prior mass and finite evidence") {
    std::vector<double> ev(7, -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(model_posteriors(ev, uniform), EvidenceError);
    std::vector<double> ev2(7, 0.0);
    ModelPriorProbs zero{std::vector<double>(7, 0.0)};
    CHECK_THROWS(model_posteriors(ev2, zero));
    CHECK_THROWS_AS(model_posteriors(std::vector<double>(6, 0.0), uniform), std::invalid_argument);
  }
}

TEST_CASE("information criteria") {
  CHECK(bic_from(-10.0, 2, 7) - aic_from(-10.0, 2) < 0.0);  // ln 7 < 2
  CHECK(bic_from(-10.0, 2, 8) - aic_from(-10.0, 2) > 0.0);  // ln 8 > 2
  CHECK(bic_from(-10.0, 2, 7) - aic_from(-10.0, 2) == doctest::Approx(2.0 * (std::log(7.0) - 2.0)));
  CHECK(bic_from(-10.0, 2, 200) - bic_from(-10.0, 2, 100) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));

  const Dataset d{{1.0, 2.0, 3.0}, "123"};
  const auto mle = maximize_likelihood(ModelFamily::Normal, d);
  CHECK(mle.theta[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(mle.theta[1] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-6));
  const double ll = log_likelihood(ModelFamily::Normal, {2.0, std::sqrt(2.0 / 3.0)}, d);
  CHECK(mle.max_log_likelihood == doctest::Approx(ll).epsilon(1e-10));
  CHECK(aic(ModelFamily::Normal, d) == doctest::Approx(-2.0 * ll + 4.0).epsilon(1e-10));
  CHECK(bic(ModelFamily::Normal, d) == doctest::Approx(-2.0 * ll + 2.0 * std::log(3.0)).epsilon(1e-10));
  CHECK_THROWS_AS(maximize_likelihood(ModelFamily::Normal, Dataset{{5.0}, "one"}), OptimizationError);
}

TEST_CASE("maximum likelihood recovers each family") {
  for (ModelFamily f : kAllFamilies) {
    CAPTURE(family_name(f));
    const ParamVector truth = params_from_mean_cov(f, 34.782, 0.116);
    RandomStream rng(derive_seed(31, {family_index(f)}));
    const Dataset d{sample(f, truth, rng, 5000), "fit"};
    const auto mle = maximize_likelihood(f, d);
    CHECK(mle.max_log_likelihood >= log_likelihood(f, truth, d));
    // Perturbations do not improve on the optimum.
    for (double e : {1e-4, -1e-4}) {
      CHECK(log_likelihood(f, {mle.theta[0] * (1 + e), mle.theta[1]}, d) <= mle.max_log_likelihood + 1e-9);
      CHECK(log_likelihood(f, {mle.theta[0], mle.theta[1] * (1 + e)}, d) <= mle.max_log_likelihood + 1e-9);
    }
    const auto mc = mean_cov(f, mle.theta);
    CHECK(mc.mean == doctest::Approx(34.782).epsilon(0.01));
    CHECK(mc.cov == doctest::Approx(0.116).epsilon(0.05));
  }
}

TEST_CASE("AIC and BIC weights") {
  const std::vector<double> equal(7, 51.0);
  for (double w : aic_weights(equal)) CHECK(w == doctest::Approx(1.0 / 7.0));
  for (double w : bic_weights(equal, uniform_model_prior(7))) CHECK(w == doctest::Approx(1.0 / 7.0));

  const std::vector<double> two{10.0, 10.0 + 2.0 * std::log(4.0)};
  const auto w = aic_weights(two);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.2).epsilon(1e-14));
  const std::vector<double> shifted{1e4 + 10.0, 1e4 + 10.0 + 2.0 * std::log(4.0)};
  CHECK(aic_weights(shifted)[0] == doctest::Approx(0.8).epsilon(1e-12));

  SUBCASE("concentrated prior gains weight iff its BIC beats the prior-weighted average likelihood") {
    RandomStream rng(17);
    for (int r = 0; r < 200; ++r) {
      std::vector<double> bics(7);
      for (auto& b : bics) b = 200.0 + 6.0 * rng.normal();
      const auto fav = kAllFamilies[rng.index(7)];
      const auto prior = concentrated_model_prior(fav);
      const auto wts = bic_weights(bics, prior);
      // Brute-force normalization.
      double z = 0.0;
      for (std::size_t k = 0; k < 7; ++k) z += prior.pi[k] * std::exp(-0.5 * (bics[k] - 200.0));
      const std::size_t j = family_index(fav);
      const double direct = prior.pi[j] * std::exp(-0.5 * (bics[j] - 200.0)) / z;
      CHECK(wts[j] == doctest::Approx(direct).epsilon(1e-12));
      CHECK((wts[j] > prior.pi[j]) == (std::exp(-0.5 * (bics[j] - 200.0)) > z));
    }
  }
}

TEST_CASE("savvy prior turns BIC weights into AIC weights") {
  RandomStream rng(2019);
  for (std::size_t n : {10u, 100u, 1000u}) {
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<int> dims(7);
      std::vector<double> ll(7), aics(7), bics(7);
      for (std::size_t j = 0; j < 7; ++j) {
        dims[j] = 1 + static_cast<int>(rng.index(3));
        ll[j] = -static_cast<double>(n) * 3.0 + 20.0 * rng.normal();
        aics[j] = aic_from(ll[j], dims[j]);
        bics[j] = bic_from(ll[j], dims[j], n);
      }
      const auto savvy = savvy_prior(dims, n);
      CHECK_NOTHROW(savvy.validate());
      const auto a = aic_weights(aics);
      const auto b = bic_weights(bics, savvy);
      for (std::size_t j = 0; j < 7; ++j) CHECK(std::fabs(a[j] - b[j]) < 1e-10);
    }
  }
  const std::vector<int> two(7, 2);
  const auto s = savvy_prior(two, 50);
  for (double p : s.pi) CHECK(p == doctest::Approx(1.0 / 7.0));
  const std::vector<int> mixed{1, 3};
  const auto sm = savvy_prior(mixed, 100);
  CHECK(sm.pi[1] / sm.pi[0] == doctest::Approx(std::exp(std::log(100.0) - 2.0)).epsilon(1e-12));
}

TEST_CASE("model prior tables") {
  const auto u = uniform_model_prior(7);
  CHECK_NOTHROW(u.validate());
  for (double p : u.pi) CHECK(p == doctest::Approx(1.0 / 7.0));
  const auto ll = concentrated_model_prior(ModelFamily::Loglogistic);
  CHECK_NOTHROW(ll.validate());
  CHECK(ll.pi[family_index(ModelFamily::Loglogistic)] == doctest::Approx(0.9));
  CHECK(ll.pi[kLN] == doctest::Approx(0.0167).epsilon(0.002));
  CHECK_THROWS_AS(concentrated_model_prior(ModelFamily::Normal, 1.5), std::invalid_argument);
  CHECK_THROWS_AS((ModelPriorProbs{{0.5, 0.6}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ModelPriorProbs{{1.5, -0.5}}.validate()), std::invalid_argument);
}
