#pragma once

#include <span>

#include "bgmiv/nd.hpp"
#include "bgmiv/rng.hpp"

namespace bgmiv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454836;

struct LatentPartition {
  int d0 = 0, d1 = 0, d2 = 0, d3 = 0;

  int total() const { return d0 + d1 + d2 + d3; }
  void validate() const;

  // Benchmark presets: demand uses [2,2,1,2] (dim 7), vector proxy [2,1,1,2] (dim 6).
  static LatentPartition demand() { return {2, 2, 1, 2}; }
  static LatentPartition vector_proxy() { return {2, 1, 1, 2}; }
};

// A latent vector plus the partition that carves it into (z0, z1, z2, z3).
struct LatentState {
  VectorXd z;
  LatentPartition part;

  auto z0() const { return z.segment(0, part.d0); }
  auto z1() const { return z.segment(part.d0, part.d1); }
  auto z2() const { return z.segment(part.d0 + part.d1, part.d2); }
  auto z3() const { return z.segment(part.d0 + part.d1 + part.d2, part.d3); }
};

enum class TreatmentKind { Continuous, Binary };

// The three generators. The treatment net sees [z0, z2, w], the outcome net
// [z0, z1, x], and the covariate net the full z; the instrument never enters
// the outcome net (exclusion restriction is structural).
struct BgmIvModel {
  LatentPartition partition;
  TreatmentKind treatment_kind = TreatmentKind::Continuous;
  nd::NetworkSpec cov_spec, treat_spec, out_spec;
  nd::ParameterSet theta, phi, omega;

  int covariate_dim() const { return cov_spec.heads.at(0).dim; }
  int latent_dim() const { return partition.total(); }

  VectorXd treat_input(const Eigen::Ref<const VectorXd>& z0, const Eigen::Ref<const VectorXd>& z2,
                       double w) const;
  VectorXd out_input(const Eigen::Ref<const VectorXd>& z0, const Eigen::Ref<const VectorXd>& z1,
                     double x) const;
};

// Appendix-B architecture: covariate net [64x5] with (mean, softplus rawvar)
// heads of dim p, treatment and outcome nets [64,32,8], LeakyReLU(0.2),
// L2 1e-4, variance floor 1e-4. Parameters start at zero; init via xavier.
BgmIvModel make_bgm_iv_model(const LatentPartition& part, int covariate_dim,
                             TreatmentKind kind = TreatmentKind::Continuous);

double log_prior(const Eigen::Ref<const VectorXd>& z);

struct LogPvGrad {
  VectorXd theta;
  VectorXd z;
};
double log_p_v(const BgmIvModel& m, const Eigen::Ref<const VectorXd>& z,
               const Eigen::Ref<const VectorXd>& v, LogPvGrad* grad = nullptr);

struct LogPxGrad {
  VectorXd phi;
  VectorXd z0, z2;
  double w = 0.0;
};
double log_p_x(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
               const Eigen::Ref<const VectorXd>& z2, double x, LogPxGrad* grad = nullptr);

struct LogPyGrad {
  VectorXd omega;
  VectorXd z0, z1;
  double x = 0.0;
};
double log_p_y(const BgmIvModel& m, double x, const Eigen::Ref<const VectorXd>& z0,
               const Eigen::Ref<const VectorXd>& z1, double y, LogPyGrad* grad = nullptr);

// c + log(sum exp(v - c)) - log M with c = max(v). Errors on empty input.
double log_mean_exp(std::span<const double> values);

struct IvMcConfig {
  int mc_samples = 1000;
  bool reparameterize_for_latent = true;
};

struct LogPivGrad {
  VectorXd omega;       // always available
  VectorXd phi;         // through the reparameterized samples (continuous) / exact (binary)
  VectorXd z0, z1, z2;  // z1 and the direct z0 path always; sample paths per config
  double w = 0.0;
};

// IV-integrated pseudo-likelihood of one subject. Continuous treatments use M
// reparameterized draws x = mu_phi + sigma_phi * eps; pass `fixed_eps` to pin
// the draws (finite-difference tests, common random numbers), otherwise they
// come from `rng`. Binary treatments evaluate the exact two-point mixture and
// consume no randomness.
double log_p_iv(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
                const Eigen::Ref<const VectorXd>& z1, const Eigen::Ref<const VectorXd>& z2, double y,
                const IvMcConfig& cfg, RngStream* rng, LogPivGrad* grad = nullptr,
                const VectorXd* fixed_eps = nullptr);

// pzv_weight * (log_prior + log_p_v) + log_p_x + log_p_iv, with the gradient
// with respect to the full latent vector on request.
double log_quasi_posterior(const BgmIvModel& m, const LatentState& state, double x, double y,
                           const Eigen::Ref<const VectorXd>& v, double w, const IvMcConfig& cfg,
                           double pzv_weight, RngStream* rng, VectorXd* z_grad = nullptr,
                           const VectorXd* fixed_eps = nullptr);

// Batched diagonal-Gaussian log-likelihood through a (mean, rawvar)-headed
// network; returns the forward cache plus per-row head cotangents of the
// summed log-likelihood so callers can run backward with their own scaling.
struct GaussBatch {
  double sum_loglik = 0.0;
  VectorXd row_loglik;
  nd::Forward fwd;
  MatrixXd dmu, dvar;  // d(sum loglik)/d(head outputs), per element
};
GaussBatch gauss_loglik_batch(const nd::NetworkSpec& spec, const nd::ParameterSet& params,
                              const Eigen::Ref<const MatrixXd>& inputs,
                              const Eigen::Ref<const MatrixXd>& targets);

}  // namespace bgmiv
