#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bgmiv/bench.hpp"
#include "bgmiv/infer.hpp"
#include "bgmiv/stats.hpp"
#include "bgmiv/train.hpp"

namespace bgmiv::harness {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Cell {
  long n = 0;
  double rho = 0.0;
};

struct ExperimentConfig {
  bench::Variant variant = bench::Variant::Lowdim;
  std::vector<Cell> cells;
  int repeats = 20;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;  // bgm_iv, bgm_iv_no_warmstart, naive_regression, two_sls
  train::TrainConfig train_cfg;
  MapConfig map_cfg;
  int proxy_dim = 784;
  double sigma_rep = 0.5;
  std::uint64_t feature_seed = 0;
  int nuisance_dim = 0;
  std::string out_dir;
  int workers = 1;
  bool write_checkpoints = true;

  void validate() const;
};

struct RunRecord {
  std::string method;
  long n = 0;
  double rho = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;  // training seed (data seed is shared across methods)
  bool failed = false;
  double final_mse = 0.0;
  std::vector<train::EvalRecord> checkpoints;
  double wall_seconds = 0.0;
  std::string warnings;  // ';'-joined
};

struct CellSummary {
  std::string method;
  long n = 0;
  double rho = 0.0;
  double mean_mse = 0.0;  // raw scale; x1e4 applied only in summary.csv
  double std_mse = 0.0;   // sample std, n-1
  int count = 0;
};

struct PairedComparison {
  std::string baseline, method;
  long n = 0;
  double rho = 0.0;
  int pairs = 0;
  double mean_diff = 0.0;  // method - baseline, raw scale
  double t_stat = 0.0, t_p = 1.0;
  bool t_degenerate = false;
  double w_stat = 0.0, w_p = 1.0, w_p_holm = 1.0;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<CellSummary> summaries;
  int exit_code = 0;
};

// Stable seed derivation, published in the README: SplitMix64 chain over
// (base, tag..., cell, repeat). The data seed omits the method so repeats
// stay paired across methods.
std::uint64_t data_seed(const ExperimentConfig& cfg, Cell cell, int repeat);
std::uint64_t run_seed(const ExperimentConfig& cfg, const std::string& method, Cell cell,
                       int repeat);

struct TwoSlsFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Classical linear-IV slope cov(W,Y)/cov(W,X); weak-instrument error when
// |cov(W,X)| < 1e-8.
TwoSlsFit two_sls_baseline(const bench::DataView& data);
double ols_slope(const bench::DataView& data);

RunRecord run_single(const ExperimentConfig& cfg, const std::string& method, Cell cell, int repeat,
                     const bench::EvaluationGrid& grid);

std::vector<CellSummary> summarize(const std::vector<RunRecord>& records);

std::vector<PairedComparison> paired_comparisons(const std::vector<RunRecord>& records,
                                                 const std::string& baseline,
                                                 const std::string& method);

void emit_outputs(const std::vector<RunRecord>& records, const std::vector<CellSummary>& summaries,
                  const ExperimentConfig& cfg, const std::string& dir);

// Runs every (method, cell, repeat), persists records and summaries under
// cfg.out_dir, and reports exit code 0 (all good) or 1 (failures).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

ExperimentConfig parse_config_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

// Reads a runs.csv produced by emit_outputs (checkpoint traces not restored).
std::vector<RunRecord> read_runs_csv(const std::string& path);

}  // namespace bgmiv::harness
