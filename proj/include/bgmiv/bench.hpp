#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "bgmiv/rng.hpp"
#include "bgmiv/scaler.hpp"

namespace bgmiv::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

enum class Variant { Lowdim, VectorProxy };

struct DemandConfig {
  long n = 1000;
  double rho = 0.5;
  std::uint64_t seed = 0;
  Variant variant = Variant::Lowdim;
  int proxy_dim = 784;
  double sigma_rep = 0.5;
  std::uint64_t feature_seed = 0;
  int nuisance_dim = 0;
};

// Hidden generator state kept for oracle tests only; training code consumes
// datasets through train_view() which exposes exactly (X, Y, V, W).
struct Diagnostics {
  VectorXd u, eps, t;
  VectorXi s;
};

struct Dataset {
  VectorXd x, y, w;
  MatrixXd v;
  Diagnostics diag;
  ScalerKind scaler_kind = ScalerKind::Identity;  // preset transform for this variant
  long n() const { return x.size(); }
  int v_dim() const { return static_cast<int>(v.cols()); }
};

struct DataView {
  const VectorXd& x;
  const VectorXd& y;
  const VectorXd& w;
  const MatrixXd& v;
};
inline DataView train_view(const Dataset& d) { return {d.x, d.y, d.w, d.v}; }

struct EvaluationGrid {
  VectorXd x;   // intervention value, original scale
  VectorXd g0;  // structural truth, original outcome scale
  MatrixXd v;
  long rows() const { return x.size(); }
};

// seasonal shape: 2((t-5)^4/600 + exp(-4(t-5)^2) + t/10 - 2)
double psi(double t);

// f0(p,t,s) = 100 + (10+p) s psi(t) - 2p, s in {1..7}
double structural_f0(double p, double t, double s);

Dataset gen_demand(const DemandConfig& cfg);
Dataset gen_vector_proxy(const DemandConfig& cfg);

// Appends k iid N(0,1) covariate columns; X, Y, W and diagnostics untouched.
Dataset augment_nuisance(const Dataset& d, int k, std::uint64_t seed);

// 20 prices in [10,25] x 20 times in [0,10] x 7 groups, inclusive endpoints.
// The vector variant draws one noisy proxy per (t,s) cell from an evaluation
// stream of feature_seed, shared across the 20 prices.
EvaluationGrid evaluation_grid(Variant variant, std::uint64_t feature_seed, int proxy_dim = 784,
                               double sigma_rep = 0.5, int nuisance_dim = 0);

struct LinearIvConfig {
  long n = 1000;
  double beta = 2.0;
  double gamma = 1.0;
  double rho = 0.8;
  std::uint64_t seed = 0;
};

// W ~ N(0,1), X = gamma W + U, Y = beta X + eps with eps = rho U + sqrt(1-rho^2) eta.
// Rejects gamma = 0 (no instrument relevance).
Dataset gen_linear_iv(const LinearIvConfig& cfg);

}  // namespace bgmiv::bench
