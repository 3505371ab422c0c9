#pragma once

#include <string>
#include <vector>

#include "bgmiv/bench.hpp"
#include "bgmiv/model.hpp"
#include "bgmiv/scaler.hpp"

namespace bgmiv {

enum class TrainObjective { Iv, Naive };

struct FittedModel {
  BgmIvModel model;  // trained theta, phi, omega
  nd::NetworkSpec enc_spec;
  nd::ParameterSet encoder;
  bool has_encoder = false;
  ScalerSpec scaler;
  TrainObjective objective = TrainObjective::Iv;
  std::vector<std::string> warnings;
};

struct MapConfig {
  enum class Init { Encoder, Zero };
  int steps = 1000;
  double learning_rate = 1e-4;
  Init init = Init::Encoder;
};

struct MapResult {
  MatrixXd z;                    // one row per covariate row
  long warning_rows = 0;         // rows where a non-finite objective was hit
  double ascent_fraction = 1.0;  // fraction of steps with non-decreasing mean objective
};

// Covariate-only MAP: ascends log p(z) + log p_theta(v|z) per row with Adam.
// Rows are independent; v must already be on the model's covariate scale.
// Consumes no randomness. Rows that hit a non-finite objective are frozen at
// their best-so-far iterate and flagged.
MapResult map_latent(const FittedModel& fm, const Eigen::Ref<const MatrixXd>& v_scaled,
                     const MapConfig& cfg);

LatentState map_latent_single(const FittedModel& fm, const VectorXd& v_scaled, const MapConfig& cfg,
                              bool* warning = nullptr);

// Outcome-net mean head at (x, z0(v), z1(v)), mapped back to the original
// outcome scale. x and v are on their original scales.
double structural_predict(const FittedModel& fm, double x, const VectorXd& v, const MapConfig& cfg);

struct MseResult {
  double mse = 0.0;
  long map_warnings = 0;
};

// Mean squared error of structural predictions over the grid, original
// outcome scale. One MAP solve per distinct covariate vector when
// cache_distinct is set (the default); the uncached path solves every row.
MseResult structural_mse(const FittedModel& fm, const bench::EvaluationGrid& grid,
                         const MapConfig& cfg, bool cache_distinct = true);

}  // namespace bgmiv
