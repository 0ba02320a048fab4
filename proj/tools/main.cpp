// Command-line runner for the plate-buckling uncertainty study.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mmuq/buckling.hpp"
#include "mmuq/errors.hpp"
#include "mmuq/experiment.hpp"

namespace {

void print_report(const std::string& command, const mmuq::RunReport& report) {
  for (const auto& d : report.diagnostics) std::cerr << "[" << command << "] " << d << '\n';
  std::cerr << command << ": " << (report.cells_total - report.cells_failed) << '/' << report.cells_total
            << " cells succeeded\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multimodel uncertainty quantification and propagation for plate buckling"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<std::size_t> workers;
  std::string experiment;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--workers", workers, "Worker threads, 0 = one per hardware thread");
  app.add_option("--experiment", experiment, "Experiment name (overrides the config)");

  auto* quantify = app.add_subcommand("quantify", "Model probabilities, posteriors and ensembles for every cell");
  auto* propagate = app.add_subcommand("propagate", "Importance-sampling propagation of every cell's ensemble");
  auto* run = app.add_subcommand("run", "quantify followed by propagate");
  auto* gen_data = app.add_subcommand("gen-data", "Write the synthetic and historical datasets");
  auto* psi_table = app.add_subcommand("psi-table", "Print psi against yield strength as CSV");
  double lo = 15.0, hi = 65.0;
  std::size_t points = 501;
  std::string table_file;
  psi_table->add_option("--lo", lo, "Lowest yield strength (ksi)");
  psi_table->add_option("--hi", hi, "Highest yield strength (ksi)");
  psi_table->add_option("--points", points, "Number of rows");
  psi_table->add_option("--file", table_file, "Write to this file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    mmuq::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = mmuq::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (workers) cfg.workers = *workers;
    if (!experiment.empty()) cfg.experiment = experiment;
    cfg.validate();

    if (psi_table->parsed()) {
      if (table_file.empty()) {
        mmuq::write_psi_table(std::cout, cfg.plate, lo, hi, points);
      } else {
        std::ofstream out(table_file);
        if (!out) throw std::runtime_error("cannot open " + table_file);
        mmuq::write_psi_table(out, cfg.plate, lo, hi, points);
      }
      return 0;
    }
    if (gen_data->parsed()) {
      const auto report = mmuq::run_gen_data(cfg);
      print_report("gen-data", report);
      return report.exit_code();
    }
    int code = 0;
    if (quantify->parsed() || run->parsed()) {
      const auto report = mmuq::run_quantify(cfg);
      print_report("quantify", report);
      code = std::max(code, report.exit_code());
    }
    if (propagate->parsed() || run->parsed()) {
      const auto report = mmuq::run_propagate(cfg);
      print_report("propagate", report);
      code = std::max(code, report.exit_code());
    }
    return code;
  } catch (const mmuq::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
