#pragma once

#include <string>

#include "bgmiv/bench.hpp"
#include "bgmiv/infer.hpp"
#include "bgmiv/train.hpp"

namespace bgmiv::io {

// shortest exact decimal for a double; identical values print identically
std::string format_double(double v);

void save_fitted_model(const std::string& path, const FittedModel& fm);
FittedModel load_fitted_model(const std::string& path);

// Full training checkpoint: parameters, latents, optimizer states, versioned
// header. Round-trips bit-exactly.
struct TrainCheckpoint {
  train::TrainState state;
  ScalerSpec scaler;
  TrainObjective objective = TrainObjective::Iv;
  TreatmentKind treatment_kind = TreatmentKind::Continuous;
  bench::Variant variant = bench::Variant::Lowdim;
  bool has_encoder = true;
};
void save_train_checkpoint(const std::string& path, const TrainCheckpoint& ck);
TrainCheckpoint load_train_checkpoint(const std::string& path);

// Dataset file: CSV `x,y,w,v_0..v_{d-1}` plus a JSON sidecar at <path>.json
// carrying the generating config, scaler kind and a diagnostics checksum.
// Reading returns the training-facing columns only.
void write_dataset_csv(const std::string& path, const bench::Dataset& ds,
                       const std::string& sidecar_json);
bench::Dataset read_dataset_csv(const std::string& path);

// Grid file: CSV `x,g0,v_0..`.
void write_grid_csv(const std::string& path, const bench::EvaluationGrid& g);
bench::EvaluationGrid read_grid_csv(const std::string& path);

// FNV-1a over the diagnostics bytes, hex string; recorded in the sidecar
std::string diagnostics_checksum(const bench::Dataset& ds);

}  // namespace bgmiv::io
