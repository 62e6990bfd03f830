#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedadg/domains.hpp"
#include "fedadg/metrics.hpp"
#include "fedadg/protocol.hpp"

#include <json.hpp>

namespace fedadg {

// Full experiment description. Parsed strictly: unknown keys, wrong types or
// out-of-range values are rejected before any work starts. The composite
// "mode" string covers the four comparison arms:
//   fedadg | fedavg | fedadg_no_rp | fedadg_no_onehot
// and fixed-reference variants are selected via "reference".
struct ExperimentConfig {
  RunMode mode = RunMode::fedadg;
  bool use_rp = true;
  bool class_conditioned = true;
  ReferenceMode reference = ReferenceMode::adaptive;
  double laplace_scale = 0.7071067811865476;
  SuiteSpec suite;
  std::size_t rounds = 30;
  std::size_t e0 = 2;
  std::size_t e1 = 5;
  std::size_t batch_size = 32;
  double base_lr = 0.035;
  double lambda0 = 0.85;
  double lambda1 = 0.15;
  double label_smoothing = 0.1;
  std::size_t feature_dim = 32;
  std::size_t rp_dim = 16;
  std::size_t noise_dim = 16;
  std::size_t hidden_dim = 64;
  bool weighted_aggregation = false;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs";

  std::size_t num_domains() const { return suite.domain_angles.size(); }
  std::size_t num_clients() const { return num_domains() - 1; }
  std::string mode_label() const;
  TrainingParams training_params() const;

  nlohmann::json to_json() const;            // canonical (sorted keys)
  std::uint64_t hash() const;                // FNV-1a over the canonical dump
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

std::string hash_hex(std::uint64_t h);

struct ExecutionOptions {
  bool concurrent_clients = false;  // execution detail, not part of the config
};

// One (target, seed) training run.
struct RunResult {
  std::uint64_t seed = 0;
  std::size_t target_index = 0;
  std::vector<RoundMetrics> history;  // rounds+1 rows; row 0 is initialization
  std::vector<double> wall_ms;        // per round; logged, never in metrics
  ParameterVector final_params;
  double final_target_acc = 0.0;
};

RunResult run_single(const ExperimentConfig& config, std::size_t target_index,
                     std::uint64_t seed, const ExecutionOptions& exec = {},
                     TraceHook* hook = nullptr);

// The metrics CSV for one run: a `# config_hash=... seed=...` stamp line,
// a header row, then one row per evaluated round ("%.17g" floats, NaN cells
// empty). FedAvg runs carry no adversarial or reference-MMD columns.
std::string metrics_csv(const ExperimentConfig& config, std::size_t target_index,
                        std::uint64_t seed, const std::vector<RoundMetrics>& history);

nlohmann::json run_summary_json(const ExperimentConfig& config,
                                std::size_t target_index, std::uint64_t seed,
                                const RunResult& result);

// Runs every (target, seed) pair and persists each run directory:
// metrics.csv, summary.json, checkpoint.bin, trace.log.
struct RunRecord {
  std::size_t target_index = 0;
  std::uint64_t seed = 0;
  double final_target_acc = 0.0;
  std::string run_dir;
};

std::vector<RunRecord> run_experiment(const ExperimentConfig& config,
                                      const ExecutionOptions& exec = {});

// Paper-style results table: one row per mode, one column per target domain
// plus a trailing average column. Cells are mean +- std over seeds.
struct ResultsTable {
  struct Cell {
    double mean = 0.0;
    double stddev = 0.0;
  };
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;  // targets then "avg"
  std::vector<std::vector<Cell>> cells;

  void check_avg_column(double tol = 1e-12) const;
  std::string to_csv() const;
  std::string pretty() const;
};

ResultsTable ablation_suite(const ExperimentConfig& base,
                            const ExecutionOptions& exec = {});
ResultsTable fixed_reference_suite(const ExperimentConfig& base,
                                   const ExecutionOptions& exec = {});

struct RpSweepPoint {
  double ratio = 0.0;
  std::size_t target_index = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct RpSweepResult {
  std::vector<RpSweepPoint> points;
  std::string to_csv() const;  // header: ratio,target,seed,accuracy
};

RpSweepResult rp_sweep(const ExperimentConfig& base,
                       const std::vector<double>& ratios,
                       const ExecutionOptions& exec = {});

}  // namespace fedadg
