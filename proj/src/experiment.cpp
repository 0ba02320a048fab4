#include "mmuq/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mmuq/ensemble.hpp"
#include "mmuq/errors.hpp"
#include "mmuq/format.hpp"
#include "mmuq/parallel.hpp"

namespace mmuq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// Tags separating the random streams of the pipeline stages.
enum Stream : std::uint64_t {
  kStreamData = 1,
  kStreamHistoricalChain = 2,
  kStreamEvidence = 3,
  kStreamChain = 4,
  kStreamEnsemble = 5,
  kStreamPropagate = 6,
};

template <std::size_t N>
std::size_t index_of(const std::array<std::string_view, N>& names, std::string_view name, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == name) return i;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

std::size_t prior_index(std::string_view name) { return index_of(kParameterPriorNames, name, "parameter prior"); }
std::size_t model_prior_index(std::string_view name) { return index_of(kModelPriorNames, name, "model prior"); }

ModelFamily family_or_throw(std::string_view name) {
  const auto f = family_from_name(name);
  if (!f) throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
  return *f;
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string join(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  out += '\n';
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::optional<std::string> read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Config

json to_json_value(const ExperimentConfig& c, bool include_runtime) {
  json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["dataset_sizes"] = c.dataset_sizes;
  j["parameter_priors"] = c.parameter_priors;
  j["model_priors"] = c.model_priors;
  j["n_k"] = c.n_k;
  j["n_d"] = c.n_d;
  j["n_propagation"] = c.n_propagation;
  j["mcmc"] = {{"n_walkers", c.mcmc.n_walkers},
               {"n_steps", c.mcmc.n_steps},
               {"burn_in", c.mcmc.burn_in},
               {"stretch_a", c.mcmc.stretch_a}};
  j["kde_support"] = c.kde_support;
  j["plate"] = {{"b", c.plate.b},           {"t", c.plate.t},       {"sigma0", c.plate.sigma0},
                {"E", c.plate.E},           {"delta0", c.plate.delta0}, {"eta", c.plate.eta}};
  j["true_model"] = {{"family", std::string(family_name(c.true_model.family))},
                     {"mean", c.true_model.mean},
                     {"cov", c.true_model.cov}};
  j["threshold"] = c.threshold;
  j["grid"] = {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"n", c.grid.n}};
  j["historical_seed"] = c.historical_seed;
  j["summary_models"] = c.summary_models;
  if (include_runtime) {
    j["historical_dir"] = c.historical_dir.string();
    j["output_dir"] = c.output_dir.string();
    j["workers"] = c.workers;
  }
  return j;
}

template <typename T>
void read_into(const json& obj, const char* key, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!obj.is_object()) throw ParseError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (experiment.empty()) throw std::invalid_argument("config: experiment name is empty");
  if (dataset_sizes.empty() || parameter_priors.empty() || model_priors.empty())
    throw std::invalid_argument("config: dataset_sizes, parameter_priors and model_priors must be nonempty");
  for (auto n : dataset_sizes)
    if (n == 0) throw std::invalid_argument("config: dataset sizes must be at least 1");
  for (const auto& p : parameter_priors) prior_index(p);
  for (const auto& m : model_priors) model_prior_index(m);
  for (const auto& s : summary_models) family_or_throw(s);
  if (n_k == 0 || n_d == 0 || n_propagation == 0 || kde_support == 1)
    throw std::invalid_argument("config: n_k, n_d and n_propagation must be >= 1 and kde_support 0 or >= 2");
  mcmc.validate(2);
  plate.validate();
  if (!(grid.n >= 2 && grid.hi > grid.lo)) throw std::invalid_argument("config: invalid grid");
  if (!std::isfinite(threshold)) throw std::invalid_argument("config: threshold must be finite");
  params_from_mean_cov(true_model.family, true_model.mean, true_model.cov);
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  reject_unknown(j,
                 {"experiment", "seed", "dataset_sizes", "parameter_priors", "model_priors", "n_k", "n_d",
                  "n_propagation", "mcmc", "kde_support", "plate", "true_model", "threshold", "grid", "historical_dir",
                  "historical_seed", "summary_models", "output_dir", "workers"},
                 "top level");
  ExperimentConfig c;
  read_into(j, "experiment", c.experiment);
  read_into(j, "seed", c.seed);
  read_into(j, "dataset_sizes", c.dataset_sizes);
  read_into(j, "parameter_priors", c.parameter_priors);
  read_into(j, "model_priors", c.model_priors);
  read_into(j, "n_k", c.n_k);
  read_into(j, "n_d", c.n_d);
  read_into(j, "n_propagation", c.n_propagation);
  if (j.contains("mcmc")) {
    const auto& m = j["mcmc"];
    reject_unknown(m, {"n_walkers", "n_steps", "burn_in", "stretch_a"}, "mcmc");
    read_into(m, "n_walkers", c.mcmc.n_walkers);
    read_into(m, "n_steps", c.mcmc.n_steps);
    read_into(m, "burn_in", c.mcmc.burn_in);
    read_into(m, "stretch_a", c.mcmc.stretch_a);
  }
  read_into(j, "kde_support", c.kde_support);
  if (j.contains("plate")) {
    const auto& p = j["plate"];
    reject_unknown(p, {"b", "t", "sigma0", "E", "delta0", "eta"}, "plate");
    read_into(p, "b", c.plate.b);
    read_into(p, "t", c.plate.t);
    read_into(p, "sigma0", c.plate.sigma0);
    read_into(p, "E", c.plate.E);
    read_into(p, "delta0", c.plate.delta0);
    read_into(p, "eta", c.plate.eta);
  }
  if (j.contains("true_model")) {
    const auto& t = j["true_model"];
    reject_unknown(t, {"family", "mean", "cov"}, "true_model");
    if (t.contains("family")) {
      std::string name;
      read_into(t, "family", name);
      const auto f = family_from_name(name);
      if (!f) throw ParseError("config: unknown true_model family '" + name + "'");
      c.true_model.family = *f;
    }
    read_into(t, "mean", c.true_model.mean);
    read_into(t, "cov", c.true_model.cov);
  }
  read_into(j, "threshold", c.threshold);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    reject_unknown(g, {"lo", "hi", "n"}, "grid");
    read_into(g, "lo", c.grid.lo);
    read_into(g, "hi", c.grid.hi);
    read_into(g, "n", c.grid.n);
  }
  if (j.contains("historical_dir")) {
    std::string s;
    read_into(j, "historical_dir", s);
    c.historical_dir = s;
  }
  read_into(j, "historical_seed", c.historical_seed);
  read_into(j, "summary_models", c.summary_models);
  if (j.contains("output_dir")) {
    std::string s;
    read_into(j, "output_dir", s);
    c.output_dir = s;
  }
  read_into(j, "workers", c.workers);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  const auto text = read_text(path);
  if (!text) throw ParseError("cannot read config file " + path.string());
  return parse_config(*text);
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json_value(cfg, true).dump(2); }

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json_value(cfg, false).dump())));
  return buf;
}

ModelPriorProbs model_prior_by_name(std::string_view name, std::size_t n) {
  switch (model_prior_index(name)) {
    case 0: return uniform_model_prior(kNumFamilies);
    case 1: return concentrated_model_prior(ModelFamily::Lognormal);
    case 2: return concentrated_model_prior(ModelFamily::Loglogistic);
    default: {
      std::array<int, kNumFamilies> dims{};
      for (std::size_t j = 0; j < kNumFamilies; ++j) dims[j] = parameter_dimension(kAllFamilies[j]);
      return savvy_prior(dims, n);
    }
  }
}

// ---------------------------------------------------------------------------
// Dataset files

Dataset ingest_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  Dataset d;
  d.label = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.find(',') != std::string::npos)
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected a single column");
      if (parse_double(line)) throw ParseError(path.string() + ":1: missing header line");
      continue;
    }
    const auto v = parse_double(line);
    if (!v || !std::isfinite(*v))
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a finite number: '" + line + "'");
    d.values.push_back(*v);
  }
  if (d.values.empty()) throw ParseError(path.string() + ": no data rows");
  return d;
}

void write_dataset(const fs::path& path, const Dataset& data, std::string_view header) {
  std::string text(header);
  text += '\n';
  for (double v : data.values) {
    text += format_double(v);
    text += '\n';
  }
  write_text(path, text);
}

fs::path experiment_dir(const ExperimentConfig& cfg) { return cfg.output_dir / cfg.experiment; }

fs::path cell_dir(const ExperimentConfig& cfg, std::size_t size, std::string_view parameter_prior,
                  std::string_view model_prior) {
  return experiment_dir(cfg) / std::to_string(size) / std::string(parameter_prior) / std::string(model_prior);
}

namespace {

// ---------------------------------------------------------------------------
// Pipeline pieces

using PriorSet = std::array<ParameterPrior, kNumFamilies>;

struct PriorBuild {
  std::optional<PriorSet> priors;
  std::string error;
};

Dataset historical_dataset(const ExperimentConfig& cfg, const MaterialSpec& material) {
  const fs::path path = cfg.historical_dir / (std::string(material.name) + ".csv");
  if (fs::exists(path)) {
    Dataset d = ingest_dataset(path);
    d.label = std::string(material.name);
    return d;
  }
  return synthesize_historical(material, cfg.historical_seed);
}

// Builds the parameter priors of every selected prior name. Informative
// priors are built per (material, family) on independent streams.
std::map<std::string, PriorBuild> build_all_priors(const ExperimentConfig& cfg, std::size_t workers) {
  std::map<std::string, PriorBuild> out;
  struct Job {
    std::string name;
    std::size_t prior_idx;
    std::size_t family_idx;
  };
  std::vector<Job> jobs;
  std::map<std::string, Dataset> historical;
  std::map<std::string, std::string> load_errors;
  for (const auto& name : cfg.parameter_priors) {
    if (out.count(name)) continue;
    const std::size_t idx = prior_index(name);
    if (idx == 0) {
      PriorSet set;
      for (std::size_t j = 0; j < kNumFamilies; ++j) set[j] = default_uniform_prior(kAllFamilies[j]);
      out[name].priors = std::move(set);
      continue;
    }
    out[name];
    try {
      historical[name] = historical_dataset(cfg, material_by_name(name));
    } catch (const std::exception& e) {
      load_errors[name] = e.what();
      continue;
    }
    for (std::size_t j = 0; j < kNumFamilies; ++j) jobs.push_back({name, idx, j});
  }

  std::vector<std::optional<KdePrior>> built(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t k) {
    const Job& job = jobs[k];
    const ModelFamily family = kAllFamilies[job.family_idx];
    EnsembleConfig mc = cfg.mcmc;
    mc.seed = derive_seed(cfg.seed, {kStreamHistoricalChain, job.prior_idx, job.family_idx});
    try {
      built[k] = build_informative_prior(family, historical.at(job.name), default_uniform_prior(family), mc,
                                         cfg.kde_support);
    } catch (const std::exception& e) {
      errors[k] = "prior " + job.name + ", model " + std::string(family_name(family)) + ": " + e.what();
    }
  });

  for (const auto& [name, msg] : load_errors) out[name].error = "historical data for " + name + ": " + msg;
  std::map<std::string, PriorSet> sets;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    auto& entry = out[jobs[k].name];
    if (!built[k]) {
      if (entry.error.empty()) entry.error = errors[k];
      continue;
    }
    sets[jobs[k].name][jobs[k].family_idx] = std::move(*built[k]);
  }
  for (auto& [name, entry] : out)
    if (!entry.priors && entry.error.empty()) entry.priors = std::move(sets[name]);
  return out;
}

struct SizeInfo {
  Dataset data;
  std::array<std::optional<MleResult>, kNumFamilies> mle;
  std::string mle_error;
};

std::map<std::size_t, SizeInfo> prepare_sizes(const ExperimentConfig& cfg) {
  const std::size_t n_max = *std::max_element(cfg.dataset_sizes.begin(), cfg.dataset_sizes.end());
  // One stream for all sizes: smaller datasets are prefixes of larger ones.
  const Dataset full = generate_data(cfg.true_model, n_max, derive_seed(cfg.seed, {kStreamData}));
  std::map<std::size_t, SizeInfo> out;
  for (auto n : cfg.dataset_sizes) {
    if (out.count(n)) continue;
    SizeInfo info;
    info.data.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(n));
    info.data.label = "synthetic n=" + std::to_string(n);
    for (std::size_t j = 0; j < kNumFamilies; ++j) {
      try {
        info.mle[j] = maximize_likelihood(kAllFamilies[j], info.data);
      } catch (const std::exception& e) {
        info.mle_error += std::string(info.mle_error.empty() ? "" : "; ") + e.what();
      }
    }
    out.emplace(n, std::move(info));
  }
  return out;
}

std::vector<double> bics_of(const SizeInfo& info) {
  std::vector<double> b(kNumFamilies);
  for (std::size_t j = 0; j < kNumFamilies; ++j)
    b[j] = bic_from(info.mle[j]->max_log_likelihood, parameter_dimension(kAllFamilies[j]), info.data.size());
  return b;
}

std::string information_criteria_csv(const ExperimentConfig& cfg, const std::map<std::size_t, SizeInfo>& sizes) {
  std::string text = "dataset_size,model,max_log_likelihood,aic,bic,aic_weight,bic_weight\n";
  for (auto n : cfg.dataset_sizes) {
    const SizeInfo& info = sizes.at(n);
    if (!info.mle_error.empty()) continue;
    std::vector<double> aics(kNumFamilies);
    for (std::size_t j = 0; j < kNumFamilies; ++j)
      aics[j] = aic_from(info.mle[j]->max_log_likelihood, parameter_dimension(kAllFamilies[j]));
    const auto bics = bics_of(info);
    const auto aw = aic_weights(aics);
    const auto bw = bic_weights(bics, uniform_model_prior(kNumFamilies));
    for (std::size_t j = 0; j < kNumFamilies; ++j)
      text += join({fmt(n), std::string(family_name(kAllFamilies[j])), fmt(info.mle[j]->max_log_likelihood),
                    fmt(aics[j]), fmt(bics[j]), fmt(aw[j]), fmt(bw[j])});
  }
  return text;
}

std::string truth_csv(const ExperimentConfig& cfg) {
  const auto stats = truth_statistics(cfg.true_model, cfg.plate, cfg.threshold);
  const auto theta = cfg.true_model.theta();
  std::string text = "statistic,value\n";
  text += join({"mean_psi", fmt(stats.mean)});
  text += join({"var_psi", fmt(stats.variance)});
  text += join({"pf", fmt(stats.pf)});
  text += join({"param1", fmt(theta[0])});
  text += join({"param2", fmt(theta[1])});
  return text;
}

struct CellKey {
  std::size_t size;
  std::string prior;
  std::string model_prior;
};

std::string cell_name(const CellKey& k) {
  return "cell (n=" + std::to_string(k.size) + ", " + k.prior + ", " + k.model_prior + ")";
}

std::string chain_summary_csv(std::span<const PosteriorChain> chains) {
  std::string text = "model,parameter,mean,sd,q025,q500,q975,acceptance_rate,autocorr_time,n_samples\n";
  for (const auto& c : chains) {
    const auto names = parameter_names(c.model);
    for (std::size_t d = 0; d < 2; ++d) {
      std::vector<double> v(c.samples.size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = c.samples[k][d];
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() > 1 ? v.size() - 1 : 1));
      const EmpiricalCdf cdf(v);
      const double tau = integrated_autocorr_time(c.samples, c.n_walkers, d);
      text += join({std::string(family_name(c.model)), std::string(names[d]), fmt(mean), fmt(sd), fmt(cdf.quantile(0.025)),
                    fmt(cdf.quantile(0.5)), fmt(cdf.quantile(0.975)), fmt(c.acceptance_rate), fmt(tau),
                    fmt(c.samples.size())});
    }
  }
  return text;
}

struct GroupOutcome {
  std::size_t failed = 0;
  std::vector<std::string> diagnostics;
};

// Evidence, model probabilities, chains and ensembles for one (size,
// parameter prior) pair and every selected model prior.
GroupOutcome quantify_group(const ExperimentConfig& cfg, std::size_t size, const std::string& prior_name,
                            const SizeInfo& info, const PriorBuild& priors) {
  GroupOutcome outcome;
  const std::size_t pidx = prior_index(prior_name);
  auto fail_all = [&](const std::string& why) {
    for (const auto& m : cfg.model_priors) {
      outcome.diagnostics.push_back(cell_name({size, prior_name, m}) + " failed: " + why);
      ++outcome.failed;
    }
    return outcome;
  };
  if (!priors.priors) return fail_all(priors.error);
  const PriorSet& set = *priors.priors;
  const fs::path group_dir = experiment_dir(cfg) / std::to_string(size) / prior_name;

  std::vector<double> log_z(kNumFamilies);
  std::string evidence_text = "dataset_size,prior_name,model,log_evidence,std_error,n_draws,n_finite\n";
  try {
    for (std::size_t j = 0; j < kNumFamilies; ++j) {
      RandomStream rng(derive_seed(cfg.seed, {kStreamEvidence, size, pidx, j}));
      const auto est = estimate_log_evidence(kAllFamilies[j], info.data, set[j], cfg.n_k, rng);
      log_z[j] = est.log_evidence;
      evidence_text += join({fmt(size), prior_name, std::string(family_name(kAllFamilies[j])), fmt(est.log_evidence),
                             fmt(est.std_error), fmt(est.n_draws), fmt(est.n_finite)});
    }
  } catch (const std::exception& e) {
    return fail_all(std::string("evidence: ") + e.what());
  }

  struct Pending {
    std::string model_prior;
    std::size_t midx;
    ModelPosteriorProbs probs;
    std::vector<ModelFamily> models;
    RandomStream rng;
    std::string error;
  };
  std::vector<Pending> cells;
  std::set<std::size_t> needed;
  for (const auto& s : cfg.summary_models) needed.insert(family_index(family_or_throw(s)));
  for (const auto& m : cfg.model_priors) {
    const std::size_t midx = model_prior_index(m);
    Pending p{m, midx, {}, {}, RandomStream(derive_seed(cfg.seed, {kStreamEnsemble, size, pidx, midx})), {}};
    try {
      if (m == "savvy") {
        if (!info.mle_error.empty()) throw OptimizationError(info.mle_error);
        const auto bics = bics_of(info);
        p.probs.pi_hat = bic_weights(bics, model_prior_by_name(m, size));
        for (double b : bics) p.probs.log_evidence.push_back(-0.5 * b);
      } else {
        p.probs = model_posteriors(log_z, model_prior_by_name(m, size));
      }
      p.models = draw_member_models(p.probs, cfg.n_d, p.rng);
      for (auto f : p.models) needed.insert(family_index(f));
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    cells.push_back(std::move(p));
  }

  // Chains only for models that some member or the summary needs; members
  // draw from them afterwards, so skipping the rest changes nothing.
  std::vector<PosteriorChain> chains;
  try {
    for (auto j : needed) {
      EnsembleConfig mc = cfg.mcmc;
      mc.seed = derive_seed(cfg.seed, {kStreamChain, size, pidx, j});
      chains.push_back(sample_posterior(kAllFamilies[j], info.data, set[j], mc));
    }
    write_text(group_dir / "evidence.csv", evidence_text);
    write_text(group_dir / "chain_summary.csv", chain_summary_csv(chains));
  } catch (const std::exception& e) {
    return fail_all(std::string("posterior sampling: ") + e.what());
  }

  const auto truth_theta = cfg.true_model.theta();
  for (auto& p : cells) {
    const CellKey key{size, prior_name, p.model_prior};
    try {
      if (!p.error.empty()) throw std::runtime_error(p.error);
      const DistributionEnsemble ens =
          assign_member_parameters(p.models, chains, p.rng, prior_name + "/" + p.model_prior);
      const double delta = avg_mean_square_distance(ens, cfg.true_model.family, truth_theta, cfg.grid);
      if (!grid_covers(ens, cfg.true_model.family, truth_theta, cfg.grid))
        outcome.diagnostics.push_back(cell_name(key) +
                                      ": note: some member density exceeds 1e-12 at a grid end; the distance "
                                      "covers the grid interval only");

      const fs::path dir = cell_dir(cfg, size, prior_name, p.model_prior);
      std::string probs = "dataset_size,model,prior_name,model_prior_name,log_evidence,posterior_prob\n";
      for (std::size_t j = 0; j < kNumFamilies; ++j)
        probs += join({fmt(size), std::string(family_name(kAllFamilies[j])), prior_name, p.model_prior,
                       fmt(p.probs.log_evidence[j]), fmt(p.probs.pi_hat[j])});

      std::string members = "member_id,model,param1,param2\n";
      for (std::size_t i = 0; i < ens.size(); ++i)
        members += join({fmt(i), std::string(family_name(ens.members[i].model)), fmt(ens.members[i].theta[0]),
                         fmt(ens.members[i].theta[1])});

      std::string density = "sigma0,ensemble_density,true_density\n";
      for (std::size_t k = 0; k < cfg.grid.n; ++k) {
        const double x = cfg.grid.at(k);
        density += join({fmt(x), fmt(mixture_density(ens, x)), fmt(pdf(cfg.true_model.family, truth_theta, x))});
      }

      std::string metrics = "dataset_size,prior_name,model_prior_name,metric,statistic,value\n";
      metrics += join({fmt(size), prior_name, p.model_prior, "avg_mean_square_distance", "density", fmt(delta)});

      write_text(dir / "model_probabilities.csv", probs);
      write_text(dir / "ensemble_members.csv", members);
      write_text(dir / "ensemble_density.csv", density);
      write_text(dir / "quantify_metrics.csv", metrics);
    } catch (const std::exception& e) {
      outcome.diagnostics.push_back(cell_name(key) + " failed: " + e.what());
      ++outcome.failed;
    }
  }
  return outcome;
}

DistributionEnsemble load_members(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  DistributionEnsemble ens;
  ens.source = path.string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = split(line, ',');
    const auto where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (f.size() != 4) throw ParseError(where + "expected 4 fields");
    const auto family = family_from_name(f[1]);
    const auto a = parse_double(f[2]);
    const auto b = parse_double(f[3]);
    if (!family || !a || !b) throw ParseError(where + "malformed member row");
    ens.members.push_back({*family, {*a, *b}});
  }
  if (ens.members.empty()) throw ParseError(path.string() + ": no members");
  return ens;
}

std::string cdf_rows(const std::string& statistic, const EmpiricalCdf& cdf) {
  std::string text;
  for (std::size_t k = 0; k < cdf.values().size(); ++k)
    text += join({statistic, fmt(cdf.values()[k]), fmt(cdf.probabilities()[k])});
  return text;
}

// Importance-sampling propagation of one cell's stored ensemble.
void propagate_cell(const ExperimentConfig& cfg, const CellKey& key, const ResponseStatistics& truth,
                    std::vector<std::string>& diagnostics) {
  const fs::path dir = cell_dir(cfg, key.size, key.prior, key.model_prior);
  const DistributionEnsemble ens = load_members(dir / "ensemble_members.csv");
  RandomStream rng(
      derive_seed(cfg.seed, {kStreamPropagate, key.size, prior_index(key.prior), model_prior_index(key.model_prior)}));
  PropagationOptions options;
  options.threshold = cfg.threshold;
  options.workers = cfg.workers;
  const auto result = propagate(ens, plate_response(cfg.plate), cfg.n_propagation, rng, options);

  std::string stats = "member_id,model,mean_psi,var_psi,pf,mean_weight,mean_psi_se,var_psi_se,pf_se\n";
  std::vector<double> means, vars, pfs;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto& m = result.members[i];
    stats += join({fmt(i), std::string(family_name(ens.members[i].model)), fmt(m.mean), fmt(m.variance), fmt(m.pf),
                   fmt(m.mean_weight), fmt(m.mean_se), fmt(m.variance_se), fmt(m.pf_se)});
    means.push_back(m.mean);
    vars.push_back(m.variance);
    pfs.push_back(m.pf);
  }

  const std::array<std::pair<std::string, EmpiricalCdf>, 3> cdfs = {
      std::pair{std::string("mean_psi"), EmpiricalCdf(means)}, std::pair{std::string("var_psi"), EmpiricalCdf(vars)},
      std::pair{std::string("pf"), EmpiricalCdf(pfs)}};
  const std::array<double, 3> truths = {truth.mean, truth.variance, truth.pf};

  std::string cdf_text = "statistic,value,cdf\n";
  std::string metrics = "dataset_size,prior_name,model_prior_name,metric,statistic,value\n";
  for (std::size_t s = 0; s < cdfs.size(); ++s) {
    const auto& [name, cdf] = cdfs[s];
    cdf_text += cdf_rows(name, cdf);
    if (cdf.sample_size() >= kMinRangePoints)
      metrics += join({fmt(key.size), key.prior, key.model_prior, "confidence_range", name, fmt(confidence_range(cdf))});
    else if (s == 0)
      diagnostics.push_back(cell_name(key) + ": note: fewer than " + std::to_string(kMinRangePoints) +
                            " members, confidence ranges omitted");
    metrics += join({fmt(key.size), key.prior, key.model_prior, "area_validation_metric", name,
                     fmt(area_validation_metric(cdf, truths[s]))});
  }

  write_text(dir / "member_stats.csv", stats);
  write_text(dir / "statistic_cdfs.csv", cdf_text);
  write_text(dir / "propagate_metrics.csv", metrics);
}

std::vector<CellKey> all_cells(const ExperimentConfig& cfg) {
  std::vector<CellKey> out;
  for (auto n : cfg.dataset_sizes)
    for (const auto& p : cfg.parameter_priors)
      for (const auto& m : cfg.model_priors) out.push_back({n, p, m});
  return out;
}

// Concatenates one per-cell file over all cells, keeping a single header.
void aggregate(const ExperimentConfig& cfg, std::initializer_list<std::string_view> files, const std::string& header,
               const fs::path& target) {
  std::string text = header + "\n";
  for (const auto& key : all_cells(cfg)) {
    for (auto file : files) {
      const auto content = read_text(cell_dir(cfg, key.size, key.prior, key.model_prior) / std::string(file));
      if (!content) continue;
      const auto first_break = content->find('\n');
      if (first_break != std::string::npos) text += content->substr(first_break + 1);
    }
  }
  write_text(target, text);
}

void write_aggregates(const ExperimentConfig& cfg) {
  const fs::path root = experiment_dir(cfg);
  aggregate(cfg, {"model_probabilities.csv"},
            "dataset_size,model,prior_name,model_prior_name,log_evidence,posterior_prob",
            root / "model_probabilities.csv");
  aggregate(cfg, {"quantify_metrics.csv", "propagate_metrics.csv"},
            "dataset_size,prior_name,model_prior_name,metric,statistic,value", root / "metrics.csv");
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command, const json& timings,
                    const RunReport& report) {
  const fs::path path = experiment_dir(cfg) / "manifest.json";
  json manifest = json::object();
  if (const auto old = read_text(path)) {
    try {
      manifest = json::parse(*old);
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["grid"] = {{"dataset_sizes", cfg.dataset_sizes},
                      {"parameter_priors", cfg.parameter_priors},
                      {"model_priors", cfg.model_priors},
                      {"density_grid", {{"lo", cfg.grid.lo}, {"hi", cfg.grid.hi}, {"n", cfg.grid.n}}}};
  manifest["config"] = to_json_value(cfg, true);
  manifest["timings"][command] = timings;
  manifest["runs"][command] = {{"cells_total", report.cells_total},
                               {"cells_failed", report.cells_failed},
                               {"diagnostics", report.diagnostics}};
  manifest["versions"] = {{"mmuq", std::string(kVersion)},
                          {"compiler", std::string(__VERSION__)},
                          {"cplusplus", static_cast<long>(__cplusplus)}};
  write_text(path, manifest.dump(2) + "\n");
}

void write_diagnostics(const ExperimentConfig& cfg, const std::string& command, const RunReport& report) {
  std::string text;
  for (const auto& d : report.diagnostics) text += "[" + command + "] " + d + "\n";
  write_text(experiment_dir(cfg) / ("diagnostics_" + command + ".log"), text);
}

RunReport quantify_groups(const ExperimentConfig& cfg, const std::vector<std::pair<std::size_t, std::string>>& groups,
                          json& timings) {
  RunReport report;
  auto t0 = std::chrono::steady_clock::now();
  const auto sizes = prepare_sizes(cfg);
  timings["data_and_mle_seconds"] = seconds_since(t0);

  std::set<std::string> prior_names;
  for (const auto& g : groups) prior_names.insert(g.second);
  ExperimentConfig sub = cfg;
  sub.parameter_priors.assign(prior_names.begin(), prior_names.end());
  t0 = std::chrono::steady_clock::now();
  const auto priors = build_all_priors(sub, cfg.workers);
  timings["prior_seconds"] = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<GroupOutcome> outcomes(groups.size());
  parallel_for(groups.size(), cfg.workers, [&](std::size_t g) {
    const auto& [size, prior] = groups[g];
    try {
      outcomes[g] = quantify_group(cfg, size, prior, sizes.at(size), priors.at(prior));
    } catch (const std::exception& e) {
      outcomes[g].diagnostics.push_back("group (n=" + std::to_string(size) + ", " + prior + ") failed: " + e.what());
      outcomes[g].failed = cfg.model_priors.size();
    }
  });
  timings["inference_seconds"] = seconds_since(t0);

  for (auto& o : outcomes) {
    report.cells_failed += o.failed;
    for (auto& d : o.diagnostics) report.diagnostics.push_back(std::move(d));
  }
  report.cells_total = groups.size() * cfg.model_priors.size();

  write_text(experiment_dir(cfg) / "information_criteria.csv", information_criteria_csv(cfg, sizes));
  return report;
}

std::vector<std::pair<std::size_t, std::string>> all_groups(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (auto n : cfg.dataset_sizes)
    for (const auto& p : cfg.parameter_priors) out.emplace_back(n, p);
  return out;
}

}  // namespace

RunReport run_quantify(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  json timings = json::object();
  RunReport report = quantify_groups(cfg, all_groups(cfg), timings);
  write_text(experiment_dir(cfg) / "truth.csv", truth_csv(cfg));
  write_aggregates(cfg);
  timings["total_seconds"] = seconds_since(t0);
  write_diagnostics(cfg, "quantify", report);
  write_manifest(cfg, "quantify", timings, report);
  return report;
}

RunReport run_propagate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  json timings = json::object();
  RunReport report;

  std::vector<std::pair<std::size_t, std::string>> missing;
  for (const auto& [n, p] : all_groups(cfg)) {
    const bool complete = std::all_of(cfg.model_priors.begin(), cfg.model_priors.end(), [&](const std::string& m) {
      return fs::exists(cell_dir(cfg, n, p, m) / "ensemble_members.csv");
    });
    if (!complete) missing.emplace_back(n, p);
  }
  if (!missing.empty()) {
    json qt = json::object();
    const RunReport q = quantify_groups(cfg, missing, qt);
    timings["inline_quantify"] = qt;
    report.diagnostics = q.diagnostics;
  }

  const auto truth = truth_statistics(cfg.true_model, cfg.plate, cfg.threshold);
  write_text(experiment_dir(cfg) / "truth.csv", truth_csv(cfg));

  const auto t1 = std::chrono::steady_clock::now();
  for (const auto& key : all_cells(cfg)) {
    ++report.cells_total;
    try {
      propagate_cell(cfg, key, truth, report.diagnostics);
    } catch (const std::exception& e) {
      report.diagnostics.push_back(cell_name(key) + " propagation failed: " + e.what());
      ++report.cells_failed;
    }
  }
  timings["propagation_seconds"] = seconds_since(t1);
  write_aggregates(cfg);
  timings["total_seconds"] = seconds_since(t0);
  write_diagnostics(cfg, "propagate", report);
  write_manifest(cfg, "propagate", timings, report);
  return report;
}

RunReport run_gen_data(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  const fs::path dir = experiment_dir(cfg) / "data";
  const std::size_t n_max = *std::max_element(cfg.dataset_sizes.begin(), cfg.dataset_sizes.end());
  const Dataset full = generate_data(cfg.true_model, n_max, derive_seed(cfg.seed, {kStreamData}));
  for (auto n : cfg.dataset_sizes) {
    Dataset d;
    d.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(n));
    write_dataset(dir / ("synthetic_" + std::to_string(n) + ".csv"), d);
    ++report.cells_total;
  }
  for (const auto& m : historical_materials()) {
    write_dataset(cfg.historical_dir / (std::string(m.name) + ".csv"), synthesize_historical(m, cfg.historical_seed));
    ++report.cells_total;
  }
  write_manifest(cfg, "gen-data", json{{"total_seconds", seconds_since(t0)}}, report);
  return report;
}

}  // namespace mmuq
