#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mmuq/buckling.hpp"
#include "mmuq/dists.hpp"
#include "mmuq/evidence.hpp"
#include "mmuq/mcmc.hpp"
#include "mmuq/metrics.hpp"
#include "mmuq/priors.hpp"

namespace mmuq {

/// Parameter-prior names in canonical order. The position of a name is
/// part of every random stream derived for it.
inline constexpr std::array<std::string_view, 5> kParameterPriorNames = {"noninformative", "ABS-A", "ABS-B", "ABS-C",
                                                                         "ASTM-A7"};
inline constexpr std::array<std::string_view, 4> kModelPriorNames = {"uniform", "strong_correct", "strong_incorrect",
                                                                     "savvy"};

struct ExperimentConfig {
  std::string experiment = "default";
  std::uint64_t seed = 20190601;
  std::vector<std::size_t> dataset_sizes = {10, 25, 50, 100, 500, 1000, 5000, 10000};
  std::vector<std::string> parameter_priors = {kParameterPriorNames.begin(), kParameterPriorNames.end()};
  std::vector<std::string> model_priors = {kModelPriorNames.begin(), kModelPriorNames.end()};
  std::size_t n_k = 10000;
  std::size_t n_d = 5000;
  std::size_t n_propagation = 100000;
  EnsembleConfig mcmc;  // seed is ignored; chains get derived seeds
  std::size_t kde_support = 0;  // 0 = every chain sample supports the KDE
  PlateConfig plate = mean_plate();
  TrueModelSpec true_model;
  double threshold = 0.6;
  Grid grid;
  std::filesystem::path historical_dir = "data/historical";
  std::uint64_t historical_seed = 1911;
  /// Models whose chains are always run and summarized, even when no
  /// ensemble member needs them.
  std::vector<std::string> summary_models = {"Lognormal"};
  std::filesystem::path output_dir = "out";
  std::size_t workers = 1;  // 0 = hardware concurrency

  /// Throws std::invalid_argument on empty selections, unknown names,
  /// zero counts or an invalid plate.
  void validate() const;
};

/// Parses a JSON config; absent keys keep their defaults and unknown keys
/// are rejected. Throws ParseError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the config.
std::string config_to_json(const ExperimentConfig& cfg);

/// Hex digest of the settings that affect results (workers and paths
/// excluded).
std::string config_hash(const ExperimentConfig& cfg);

/// Prior model probabilities by name. `n` is the dataset size (used by
/// the savvy prior).
ModelPriorProbs model_prior_by_name(std::string_view name, std::size_t n);

/// Reads a one-column CSV with a header line. Throws ParseError naming the
/// offending line, or if the file holds no data rows.
Dataset ingest_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Dataset& data, std::string_view header = "yield_ksi");

std::filesystem::path experiment_dir(const ExperimentConfig& cfg);
std::filesystem::path cell_dir(const ExperimentConfig& cfg, std::size_t size, std::string_view parameter_prior,
                               std::string_view model_prior);

struct RunReport {
  std::size_t cells_total = 0;
  std::size_t cells_failed = 0;
  std::vector<std::string> diagnostics;

  /// 0 on full success, 2 if any cell failed.
  int exit_code() const noexcept { return cells_failed == 0 ? 0 : 2; }
};

/// Inference stage for every (size, parameter prior, model prior) cell.
RunReport run_quantify(const ExperimentConfig& cfg);

/// Propagation stage; cells without a stored ensemble are quantified first.
RunReport run_propagate(const ExperimentConfig& cfg);

/// Writes the synthetic dataset of every size under <output>/<experiment>/data
/// and the historical stand-in datasets into historical_dir.
RunReport run_gen_data(const ExperimentConfig& cfg);

}  // namespace mmuq
