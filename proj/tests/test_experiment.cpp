#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "mmuq/buckling.hpp"
#include "mmuq/errors.hpp"
#include "mmuq/experiment.hpp"
#include "mmuq/format.hpp"
#include "support.hpp"

using namespace mmuq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mmuq_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

using Rows = std::vector<std::map<std::string, std::string>>;

Rows read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  Rows rows;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f;
    std::map<std::string, std::string> row;
    for (const auto& h : header) {
      std::getline(ss, f, ',');
      row[h] = f;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double num(const std::string& s) { return *parse_double(s); }

ExperimentConfig tiny_config(const fs::path& root) {
  ExperimentConfig cfg;
  cfg.experiment = "tiny";
  cfg.seed = 7;
  cfg.dataset_sizes = {10};
  cfg.parameter_priors = {"noninformative"};
  cfg.model_priors = {"uniform", "strong_correct", "savvy"};
  cfg.n_k = 500;
  cfg.n_d = 60;
  cfg.n_propagation = 20000;
  cfg.mcmc.n_steps = 300;
  cfg.mcmc.burn_in = 100;
  cfg.output_dir = root / "out";
  cfg.historical_dir = root / "historical";
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto def = parse_config("{}");
  CHECK(def.seed == ExperimentConfig{}.seed);
  CHECK(def.dataset_sizes == std::vector<std::size_t>{10, 25, 50, 100, 500, 1000, 5000, 10000});
  CHECK(def.parameter_priors.size() == 5);
  CHECK(def.model_priors.size() == 4);
  CHECK(def.n_d == 5000);
  CHECK(def.n_propagation == 100000);
  CHECK(def.threshold == 0.6);

  const auto c = parse_config(R"({"seed": 5, "dataset_sizes": [10, 100], "parameter_priors": ["ABS-B"],
      "model_priors": ["savvy"], "mcmc": {"n_steps": 900, "burn_in": 300},
      "plate": {"delta0": 0.0}, "grid": {"n": 101}, "output_dir": "elsewhere"})");
  CHECK(c.seed == 5);
  CHECK(c.dataset_sizes == std::vector<std::size_t>{10, 100});
  CHECK(c.mcmc.n_steps == 900);
  CHECK(c.mcmc.n_walkers == 32);
  CHECK(c.plate.delta0 == 0.0);
  CHECK(c.plate.eta == mean_plate().eta);
  CHECK(c.grid.n == 101);
  CHECK(c.output_dir == fs::path("elsewhere"));

  CHECK_THROWS_AS(parse_config(R"({"sede": 5})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"mcmc": {"walkers": 8}})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"parameter_priors": ["ABS-Z"]})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"model_priors": []})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"n_k": 0})"), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"plate": {"t": -1}})"), ParseError);
  CHECK_THROWS_AS(parse_config("{not json"), ParseError);

  // Round trip through the canonical JSON.
  const auto again = parse_config(config_to_json(c));
  CHECK(config_hash(again) == config_hash(c));
}

TEST_CASE("config hash ignores runtime settings only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.workers = 8;
  b.output_dir = "/tmp/x";
  CHECK(config_hash(a) == config_hash(b));
  b.seed += 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("model priors by name") {
  const auto sc = model_prior_by_name("strong_correct", 10);
  CHECK(sc.pi[family_index(ModelFamily::Lognormal)] == doctest::Approx(0.9));
  const auto si = model_prior_by_name("strong_incorrect", 10);
  CHECK(si.pi[family_index(ModelFamily::Loglogistic)] == doctest::Approx(0.9));
  for (double p : model_prior_by_name("uniform", 10).pi) CHECK(p == doctest::Approx(1.0 / 7.0));
  // Every family has two parameters, so the savvy prior is uniform here.
  for (double p : model_prior_by_name("savvy", 1000).pi) CHECK(p == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(model_prior_by_name("jeffreys", 10), std::invalid_argument);
}

TEST_CASE("dataset files") {
  const fs::path dir = scratch("ingest");
  write_file(dir / "three.csv", "yield_ksi\n34.1\n35.25\n\n33.0\n");
  const Dataset d = ingest_dataset(dir / "three.csv");
  CHECK(d.values == std::vector<double>{34.1, 35.25, 33.0});

  write_file(dir / "bad.csv", "yield_ksi\n34.1\nabc\n33.0\n");
  try {
    ingest_dataset(dir / "bad.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  write_file(dir / "empty.csv", "");
  CHECK_THROWS_AS(ingest_dataset(dir / "empty.csv"), ParseError);
  write_file(dir / "header_only.csv", "yield_ksi\n");
  CHECK_THROWS_AS(ingest_dataset(dir / "header_only.csv"), ParseError);
  write_file(dir / "no_header.csv", "34.1\n35.0\n");
  CHECK_THROWS_AS(ingest_dataset(dir / "no_header.csv"), ParseError);
  write_file(dir / "two_cols.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(ingest_dataset(dir / "two_cols.csv"), ParseError);
  CHECK_THROWS_AS(ingest_dataset(dir / "missing.csv"), ParseError);

  // Round trip to full precision.
  const Dataset g = generate_data(TrueModelSpec{}, 500, 3);
  write_dataset(dir / "round.csv", g);
  CHECK(ingest_dataset(dir / "round.csv").values == g.values);
}

TEST_CASE("gen-data writes the synthetic and historical sets") {
  const fs::path root = scratch("gendata");
  ExperimentConfig cfg = tiny_config(root);
  cfg.dataset_sizes = {10, 100};
  const auto report = run_gen_data(cfg);
  CHECK(report.exit_code() == 0);
  const auto d10 = ingest_dataset(experiment_dir(cfg) / "data" / "synthetic_10.csv");
  const auto d100 = ingest_dataset(experiment_dir(cfg) / "data" / "synthetic_100.csv");
  CHECK(std::equal(d10.values.begin(), d10.values.end(), d100.values.begin()));
  for (const auto& m : historical_materials()) {
    const auto h = ingest_dataset(cfg.historical_dir / (std::string(m.name) + ".csv"));
    CHECK(h.values == synthesize_historical(m, cfg.historical_seed).values);
  }
}

TEST_CASE("quantify: probability tables, savvy identity and outputs") {
  const fs::path root = scratch("quantify");
  const ExperimentConfig cfg = tiny_config(root);
  const auto report = run_quantify(cfg);
  CHECK(report.cells_total == 3);
  CHECK(report.cells_failed == 0);
  CHECK(report.exit_code() == 0);

  const auto uniform = read_csv(cell_dir(cfg, 10, "noninformative", "uniform") / "model_probabilities.csv");
  REQUIRE(uniform.size() == 7);
  double sum = 0.0;
  for (const auto& r : uniform) sum += num(r.at("posterior_prob"));
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // Savvy cell equals the AIC weights of the same dataset.
  const auto savvy = read_csv(cell_dir(cfg, 10, "noninformative", "savvy") / "model_probabilities.csv");
  const auto ic = read_csv(experiment_dir(cfg) / "information_criteria.csv");
  REQUIRE(savvy.size() == 7);
  REQUIRE(ic.size() == 7);
  for (std::size_t j = 0; j < 7; ++j) {
    CHECK(savvy[j].at("model") == ic[j].at("model"));
    CHECK(std::fabs(num(savvy[j].at("posterior_prob")) - num(ic[j].at("aic_weight"))) < 1e-6);
  }

  // strong_correct shifts mass toward the lognormal relative to uniform.
  const auto strong = read_csv(cell_dir(cfg, 10, "noninformative", "strong_correct") / "model_probabilities.csv");
  const std::size_t ln = family_index(ModelFamily::Lognormal);
  CHECK(num(strong[ln].at("posterior_prob")) > num(uniform[ln].at("posterior_prob")));

  const auto members = read_csv(cell_dir(cfg, 10, "noninformative", "uniform") / "ensemble_members.csv");
  CHECK(members.size() == cfg.n_d);
  const auto density = read_csv(cell_dir(cfg, 10, "noninformative", "uniform") / "ensemble_density.csv");
  CHECK(density.size() == cfg.grid.n);
  const auto metrics = read_csv(experiment_dir(cfg) / "metrics.csv");
  CHECK(metrics.size() == 3);
  CHECK(fs::exists(experiment_dir(cfg) / "10" / "noninformative" / "evidence.csv"));
  CHECK(fs::exists(experiment_dir(cfg) / "10" / "noninformative" / "chain_summary.csv"));
  CHECK(fs::exists(experiment_dir(cfg) / "manifest.json"));
  CHECK(fs::exists(experiment_dir(cfg) / "truth.csv"));
}

TEST_CASE("propagate: ABS-B prior run") {
  const fs::path root = scratch("propagate");
  ExperimentConfig cfg = tiny_config(root);
  cfg.dataset_sizes = {100};
  cfg.parameter_priors = {"ABS-B"};
  cfg.model_priors = {"uniform"};
  cfg.n_d = 100;
  cfg.n_propagation = 100000;
  cfg.kde_support = 2000;
  const auto report = run_propagate(cfg);
  CHECK(report.exit_code() == 0);

  const fs::path dir = cell_dir(cfg, 100, "ABS-B", "uniform");
  const auto stats = read_csv(dir / "member_stats.csv");
  REQUIRE(stats.size() == cfg.n_d);
  std::vector<double> means;
  for (const auto& r : stats) means.push_back(num(r.at("mean_psi")));
  std::sort(means.begin(), means.end());
  const EmpiricalCdf cdf(means);
  CHECK(cdf.quantile(0.025) <= 0.62089);
  CHECK(cdf.quantile(0.975) >= 0.62089);

  // Importance-sampled P_f per member against the semi-analytic value.
  const auto members = read_csv(dir / "ensemble_members.csv");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto f = *family_from_name(members[i].at("model"));
    const ParamVector theta{num(members[i].at("param1")), num(members[i].at("param2"))};
    diffs.push_back(std::fabs(num(stats[i].at("pf")) - pf_semianalytic(f, theta, cfg.threshold, cfg.plate)));
  }
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  CHECK(diffs[diffs.size() / 2] < 0.003);

  const auto metrics = read_csv(dir / "propagate_metrics.csv");
  int ranges = 0, areas = 0;
  for (const auto& r : metrics) {
    ranges += r.at("metric") == "confidence_range";
    areas += r.at("metric") == "area_validation_metric";
  }
  CHECK(ranges == 3);
  CHECK(areas == 3);
}

TEST_CASE("propagate: a one-member ensemble gives step CDFs") {
  const fs::path root = scratch("single");
  ExperimentConfig cfg = tiny_config(root);
  cfg.model_priors = {"uniform"};
  cfg.n_d = 1;
  const auto report = run_propagate(cfg);
  CHECK(report.exit_code() == 0);
  const auto cdfs = read_csv(cell_dir(cfg, 10, "noninformative", "uniform") / "statistic_cdfs.csv");
  REQUIRE(cdfs.size() == 3);
  for (const auto& r : cdfs) CHECK(num(r.at("cdf")) == 1.0);
  // Too few members for a 95% range: noted, not failed.
  bool noted = false;
  for (const auto& d : report.diagnostics) noted = noted || d.find("confidence ranges omitted") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("runs are byte-identical across worker counts") {
  const fs::path root = scratch("determinism");
  ExperimentConfig a = tiny_config(root);
  a.dataset_sizes = {10, 25};
  a.parameter_priors = {"noninformative", "ABS-C"};
  a.kde_support = 500;
  a.output_dir = root / "one";
  ExperimentConfig b = a;
  b.output_dir = root / "four";
  b.workers = 4;
  CHECK(run_propagate(a).exit_code() == 0);
  CHECK(run_propagate(b).exit_code() == 0);

  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(experiment_dir(a))) {
    if (e.path().extension() != ".csv") continue;
    const fs::path other = experiment_dir(b) / fs::relative(e.path(), experiment_dir(a));
    REQUIRE(fs::exists(other));
    std::ifstream x(e.path(), std::ios::binary), y(other, std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    CHECK_MESSAGE(sx == sy, e.path().string());
    ++compared;
  }
  CHECK(compared > 20);
}

TEST_CASE("density distance decays with data under the ABS-B prior") {
  const fs::path root = scratch("decay");
  ExperimentConfig cfg = tiny_config(root);
  cfg.dataset_sizes = {10, 25, 50, 100, 500, 1000, 5000, 10000};
  cfg.parameter_priors = {"ABS-B"};
  cfg.model_priors = {"uniform"};
  cfg.n_d = 200;
  cfg.kde_support = 2000;
  const auto report = run_quantify(cfg);
  REQUIRE(report.exit_code() == 0);
  std::vector<double> sizes, deltas;
  for (const auto& r : read_csv(experiment_dir(cfg) / "metrics.csv")) {
    if (r.at("metric") != "avg_mean_square_distance") continue;
    sizes.push_back(num(r.at("dataset_size")));
    deltas.push_back(num(r.at("value")));
  }
  REQUIRE(sizes.size() == 8);
  const double rho = spearman(sizes, deltas);
  CAPTURE(rho);
  CHECK(rho < -0.8);
}
