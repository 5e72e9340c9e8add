#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "infosamp/bayes.hpp"
#include "infosamp/common.hpp"
#include "infosamp/infer.hpp"
#include "infosamp/synthpop.hpp"

namespace infosamp {

struct ExperimentDef {
  std::string name;
  HypothesisSpec hyp;
  bool run_ps = false;  // PS tests only apply when H is the ignorable model
};

struct ExperimentConfig {
  int M = 200;
  int N = 500;
  int n = 50;
  PopulationModelSpec population;
  DesignVariableSpec design;
  std::vector<ExperimentDef> experiments;
  std::vector<double> levels = {0.01, 0.025, 0.05, 0.10};
  std::vector<double> calibration_levels = {0.025, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95};
  McmcConfig mcmc;
  std::uint64_t seed = 24601;
  std::string output_dir = "out";
  FbstMode mode = FbstMode::standard;
  CovarianceMode covariance = CovarianceMode::full;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// the simulation-study defaults: M=200, N=500, n=50, experiments 1-3 (plus the
// superset variant of experiment 3, kept as a diagnostic)
ExperimentConfig paper_config();
ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

struct ReplicateRecord {
  int replicate = 0;
  std::string experiment;
  std::string test;       // fbst | lr | ps1 | ps2 | population
  double level = 0.0;
  double ev_or_stat = 0.0;
  bool reject = false;
  bool ok = true;
  std::string note;       // failure reason when !ok
};

struct AggregateRow {
  std::string experiment;
  std::string test;
  double level = 0.0;
  double proportion = 0.0;
  int n_effective = 0;
};

struct ExperimentResult {
  std::vector<ReplicateRecord> records;
  std::vector<AggregateRow> table;
  int failed_replicates = 0;
  double wall_seconds = 0.0;
};

// one population -> one sample -> all configured tests at all levels
std::vector<ReplicateRecord> run_replicate(const ExperimentConfig& config, int replicate,
                                           bool calibration = false);

// the Monte Carlo loop; calibration=true reruns experiment 1 with Z generated
// under H (y-terms dropped) at the calibration levels
ExperimentResult run_experiment_suite(const ExperimentConfig& config,
                                      bool calibration = false);

std::vector<AggregateRow> aggregate_records(const std::vector<ReplicateRecord>& records);

void write_table1(const ExperimentResult& result, const std::string& path);
void write_table2(const ExperimentResult& result, const std::string& path);
void write_replicates(const ExperimentResult& result, const std::string& path);
void write_manifest(const ExperimentConfig& config, const ExperimentResult& result,
                    const std::string& path, const std::string& command);

}  // namespace infosamp
