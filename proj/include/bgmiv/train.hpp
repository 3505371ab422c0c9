#pragma once

#include <cstdint>
#include <vector>

#include "bgmiv/bench.hpp"
#include "bgmiv/infer.hpp"
#include "bgmiv/model.hpp"

namespace bgmiv::train {

enum class WarmStartMode { SimplifiedEgm, XavierOnly };

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;  // 64 for the demand preset, 32 for the vector preset
  double lr_theta = 1e-4;
  double lr_phi = 1e-4;
  double lr_omega = 1e-4;
  double lr_latent = 1e-4;
  int warmup_epochs = 0;
  int mc_train = 1000;
  int eval_every = 10;
  double pzv_weight = 0.5;
  WarmStartMode warm_start = WarmStartMode::SimplifiedEgm;
  int warm_start_iters = 2000;
  double warm_start_lr = 2e-4;
  bool reparameterize_for_latent = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// A training problem with columns already on the model scale.
struct Problem {
  MatrixXd v;
  VectorXd x, y, w;
  ScalerSpec scaler;
  LatentPartition partition;
  TreatmentKind treatment_kind = TreatmentKind::Continuous;
  TrainObjective objective = TrainObjective::Iv;
  bench::Variant variant = bench::Variant::Lowdim;

  long n() const { return x.size(); }
};

// Fits the variant's scaler and applies it. standardize_fit scales all four
// column groups; fixed_dfiv only X and Y.
Problem make_problem(const bench::DataView& data, ScalerKind scaler_kind,
                     const LatentPartition& part, TrainObjective objective, bench::Variant variant,
                     TreatmentKind kind = TreatmentKind::Continuous);

struct TrainState {
  BgmIvModel model;
  nd::NetworkSpec enc_spec;
  nd::ParameterSet encoder;
  nd::AdamState adam_theta, adam_phi, adam_omega;
  MatrixXd latents;             // n x latent_dim, persistent across epochs
  MatrixXd latent_m, latent_v;  // per-subject Adam moments
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> latent_step;
  int epoch = 0;
};

struct EvalRecord {
  int epoch = 0;
  double loss_v = 0.0, loss_x = 0.0, loss_y = 0.0, latent_obj = 0.0;
  bool has_mse = false;
  double mse = 0.0;
  long map_warnings = 0;
};

struct TrainHistory {
  std::vector<double> warm_loss;  // warm-start loss trace, one entry per iteration
  std::vector<EvalRecord> checkpoints;
};

struct TrainResult {
  FittedModel fitted;
  TrainHistory history;
};

struct StepLosses {
  double loss_v = 0.0, loss_x = 0.0, loss_y = 0.0, latent_obj = 0.0;
  bool y_active = false;
};

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainState init_state(const Problem& pr, const TrainConfig& cfg);

// Warm start: simplified_egm jointly trains the encoder and covariate
// generator on reconstruction NLL plus a latent moment penalty, then sets
// z_i = e(v_i); xavier_only leaves parameters at their Xavier init and draws
// z_i ~ N(0, I).
void warm_start(TrainState& st, const Problem& pr, const TrainConfig& cfg,
                TrainHistory* history = nullptr);

// One warm-start objective evaluation on a covariate batch: reconstruction
// NLL + latent moment penalty + the L2 penalties of both networks.
double warm_start_objective(const TrainState& st, const Eigen::Ref<const MatrixXd>& vb,
                            VectorXd* enc_grad, VectorXd* theta_grad);

// One alternating step on a mini-batch: (a) theta, (b) phi, (c) omega under
// the IV-integrated (or naive) outcome objective, (d) Adam ascent on the
// batch latents. The latent step reuses the step-(c) evaluation of the
// outcome term (pre-update omega) and the post-update theta and phi.
StepLosses minibatch_step(TrainState& st, const Problem& pr, const std::vector<long>& batch,
                          const TrainConfig& cfg, RngStream& mc_rng);

FittedModel to_fitted(const TrainState& st, const Problem& pr, const TrainConfig& cfg);

// Full loop: epochs+1 epoch indices, fresh uniform shuffle per epoch,
// evaluation hook every eval_every epochs and at the final epoch.
TrainResult train(const Problem& pr, const TrainConfig& cfg,
                  const bench::EvaluationGrid* grid = nullptr, const MapConfig& map_cfg = {});

}  // namespace bgmiv::train
