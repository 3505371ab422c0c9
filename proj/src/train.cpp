#include "bgmiv/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace bgmiv::train {

namespace {

[[noreturn]] void fail_step(int epoch, long batch_index, const std::string& what) {
  std::ostringstream os;
  os << "training aborted at epoch " << epoch << ", batch " << batch_index << ": " << what;
  throw TrainError(os.str());
}

void require_finite(double loss, int epoch, long batch_index, const char* which) {
  if (!std::isfinite(loss)) fail_step(epoch, batch_index, std::string(which) + " loss is non-finite");
}

// Bernoulli log-likelihood batch through a logit-headed network.
struct BernoulliBatch {
  double sum_loglik = 0.0;
  VectorXd row_loglik;
  nd::Forward fwd;
  MatrixXd dlogit;
};

BernoulliBatch bernoulli_loglik_batch(const nd::NetworkSpec& spec, const nd::ParameterSet& params,
                                      const Eigen::Ref<const MatrixXd>& inputs,
                                      const Eigen::Ref<const VectorXd>& x) {
  BernoulliBatch b;
  b.fwd = nd::forward(spec, params, inputs);
  const long n = inputs.rows();
  b.row_loglik.resize(n);
  b.dlogit.resize(n, 1);
  for (long i = 0; i < n; ++i) {
    if (x[i] != 0.0 && x[i] != 1.0)
      throw std::invalid_argument("binary treatment must be 0 or 1");
    const double logit = b.fwd.head_out[0](i, 0);
    b.row_loglik[i] = x[i] == 1.0 ? -nd::softplus(-logit) : -nd::softplus(logit);
    const double pi = nd::sigmoid(logit);
    b.dlogit(i, 0) = x[i] == 1.0 ? 1.0 - pi : -pi;
  }
  b.sum_loglik = b.row_loglik.sum();
  return b;
}

void fisher_yates(std::vector<long>& order, RngStream& rng) {
  for (long i = static_cast<long>(order.size()) - 1; i > 0; --i) {
    const long j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
}

// Adam ascent on one subject's latent row.
void latent_adam_ascent(TrainState& st, long subject, const Eigen::Ref<const VectorXd>& grad,
                        double lr) {
  constexpr double b1 = 0.9, b2 = 0.99, eps = 1e-8;
  st.latent_step[subject] += 1;
  const double t = static_cast<double>(st.latent_step[subject]);
  auto m = st.latent_m.row(subject);
  auto v = st.latent_v.row(subject);
  m = b1 * m + (1.0 - b1) * grad.transpose();
  v = b2 * v + (1.0 - b2) * grad.transpose().cwiseProduct(grad.transpose());
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  st.latents.row(subject).array() +=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

nd::NetworkSpec encoder_spec(const Problem& pr) {
  nd::NetworkSpec s;
  s.name = "encoder";
  s.input_dim = static_cast<int>(pr.v.cols());
  // the vector variant routes the proxy through the feature block widths
  s.hidden_widths = pr.variant == bench::Variant::VectorProxy
                        ? std::vector<int>{128, 64, 128, 64}
                        : std::vector<int>{64, 64, 64, 64, 64};
  s.heads = {{"latent", pr.partition.total(), nd::HeadTransform::Identity, 0.0}};
  s.l2_coefficient = 1e-4;
  return s;
}

struct BatchColumns {
  MatrixXd v, z, tin;
  VectorXd x, y, w;
};

BatchColumns gather(const TrainState& st, const Problem& pr, const std::vector<long>& batch) {
  const long B = static_cast<long>(batch.size());
  const auto& part = pr.partition;
  BatchColumns c;
  c.v.resize(B, pr.v.cols());
  c.z.resize(B, part.total());
  c.tin.resize(B, part.d0 + part.d2 + 1);
  c.x.resize(B);
  c.y.resize(B);
  c.w.resize(B);
  for (long b = 0; b < B; ++b) {
    const long i = batch[b];
    c.v.row(b) = pr.v.row(i);
    c.z.row(b) = st.latents.row(i);
    c.x[b] = pr.x[i];
    c.y[b] = pr.y[i];
    c.w[b] = pr.w[i];
    c.tin.row(b).segment(0, part.d0) = st.latents.row(i).segment(0, part.d0);
    c.tin.row(b).segment(part.d0, part.d2) =
        st.latents.row(i).segment(part.d0 + part.d1, part.d2);
    c.tin(b, part.d0 + part.d2) = pr.w[i];
  }
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (lr_theta < 0 || lr_phi < 0 || lr_omega < 0 || lr_latent < 0 || warm_start_lr < 0)
    throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
  if (warmup_epochs < 0) throw std::invalid_argument("TrainConfig: warmup_epochs must be >= 0");
  if (mc_train < 1) throw std::invalid_argument("TrainConfig: mc_train must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
  if (pzv_weight < 0.0 || pzv_weight > 1.0)
    throw std::invalid_argument("TrainConfig: pzv_weight must be in [0,1]");
  if (warm_start_iters < 0) throw std::invalid_argument("TrainConfig: warm_start_iters must be >= 0");
}

Problem make_problem(const bench::DataView& data, ScalerKind scaler_kind,
                     const LatentPartition& part, TrainObjective objective, bench::Variant variant,
                     TreatmentKind kind) {
  if (data.x.size() < 1) throw std::invalid_argument("make_problem: empty dataset");
  Problem pr;
  switch (scaler_kind) {
    case ScalerKind::StandardizeFit:
      pr.scaler = ScalerSpec::standardize(data.x, data.y, data.v, data.w);
      break;
    case ScalerKind::FixedDfiv:
      pr.scaler = ScalerSpec::fixed_dfiv(static_cast<int>(data.v.cols()));
      break;
    case ScalerKind::Identity:
      pr.scaler = ScalerSpec::identity(static_cast<int>(data.v.cols()));
      break;
  }
  pr.x = pr.scaler.apply_x(data.x);
  pr.y = pr.scaler.apply_y(data.y);
  pr.w = pr.scaler.apply_w(data.w);
  pr.v = pr.scaler.apply_v(data.v);
  pr.partition = part;
  pr.objective = objective;
  pr.variant = variant;
  pr.treatment_kind = kind;
  return pr;
}

TrainState init_state(const Problem& pr, const TrainConfig& cfg) {
  cfg.validate();
  nd::tune_allocator();
  TrainState st;
  st.model = make_bgm_iv_model(pr.partition, static_cast<int>(pr.v.cols()), pr.treatment_kind);
  RngStream rt(derive_seed(cfg.seed, "init-theta"));
  RngStream rp(derive_seed(cfg.seed, "init-phi"));
  RngStream ro(derive_seed(cfg.seed, "init-omega"));
  RngStream re(derive_seed(cfg.seed, "init-encoder"));
  st.model.theta = nd::xavier_init(st.model.cov_spec, rt);
  st.model.phi = nd::xavier_init(st.model.treat_spec, rp);
  st.model.omega = nd::xavier_init(st.model.out_spec, ro);
  st.enc_spec = encoder_spec(pr);
  st.encoder = nd::xavier_init(st.enc_spec, re);
  st.adam_theta = nd::AdamState(st.model.theta.total_count());
  st.adam_phi = nd::AdamState(st.model.phi.total_count());
  st.adam_omega = nd::AdamState(st.model.omega.total_count());
  const long n = pr.n();
  const int zd = pr.partition.total();
  st.latents = MatrixXd::Zero(n, zd);
  st.latent_m = MatrixXd::Zero(n, zd);
  st.latent_v = MatrixXd::Zero(n, zd);
  st.latent_step = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(n);
  return st;
}

double warm_start_objective(const TrainState& st, const Eigen::Ref<const MatrixXd>& vb,
                            VectorXd* enc_grad, VectorXd* theta_grad) {
  const long B = vb.rows();
  const int zd = st.model.partition.total();
  const double inv_b = 1.0 / static_cast<double>(B);

  nd::Forward ef = nd::forward(st.enc_spec, st.encoder, vb);
  const MatrixXd& z = ef.head_out[0];
  GaussBatch gb = gauss_loglik_batch(st.model.cov_spec, st.model.theta, z, vb);

  const Eigen::RowVectorXd mean = z.colwise().mean();
  MatrixXd centered = z.rowwise() - mean;
  MatrixXd covm = centered.transpose() * centered * inv_b;
  MatrixXd cov_err = covm - MatrixXd::Identity(zd, zd);
  const double loss = -gb.sum_loglik * inv_b + mean.squaredNorm() + cov_err.squaredNorm() +
                      nd::l2_penalty(st.model.cov_spec, st.model.theta) +
                      nd::l2_penalty(st.enc_spec, st.encoder);
  if (!enc_grad && !theta_grad) return loss;

  // covariate generator gradient and the latent cotangent of the NLL term
  nd::Gradients gcov;
  nd::backward(st.model.cov_spec, st.model.theta, gb.fwd, {-inv_b * gb.dmu, -inv_b * gb.dvar},
               gcov, true, true);
  nd::add_l2_gradient(st.model.cov_spec, st.model.theta, gcov.param);
  if (theta_grad) *theta_grad = std::move(gcov.param);

  if (enc_grad) {
    // moment-penalty gradient: 2 m / B + (4/B) (C - I)(z_i - m)
    MatrixXd dz = gcov.input;
    dz.rowwise() += (2.0 * inv_b) * mean;
    dz.noalias() += (4.0 * inv_b) * (centered * cov_err);
    nd::Gradients genc;
    nd::backward(st.enc_spec, st.encoder, ef, {dz}, genc, true, false);
    nd::add_l2_gradient(st.enc_spec, st.encoder, genc.param);
    *enc_grad = std::move(genc.param);
  }
  return loss;
}

void warm_start(TrainState& st, const Problem& pr, const TrainConfig& cfg, TrainHistory* history) {
  const long n = pr.n();
  const int zd = pr.partition.total();

  if (cfg.warm_start == WarmStartMode::XavierOnly) {
    RngStream rng(derive_seed(cfg.seed, "latent-init"));
    for (long i = 0; i < n; ++i)
      for (int j = 0; j < zd; ++j) st.latents(i, j) = rng.normal();
    return;
  }

  // simplified EGM: joint encoder + covariate-generator pretraining
  nd::AdamState adam_enc(st.encoder.total_count());
  nd::AdamState adam_theta(st.model.theta.total_count());
  RngStream batch_rng(derive_seed(cfg.seed, "warm-batch"));
  const long B = std::min<long>(cfg.batch_size, n);

  MatrixXd vb(B, pr.v.cols());
  for (int it = 0; it < cfg.warm_start_iters; ++it) {
    for (long b = 0; b < B; ++b) vb.row(b) = pr.v.row(batch_rng.below(n));
    VectorXd genc, gtheta;
    const double loss = warm_start_objective(st, vb, &genc, &gtheta);
    if (!std::isfinite(loss)) fail_step(-1, it, "warm-start loss is non-finite");
    if (history) history->warm_loss.push_back(loss);
    try {
      nd::adam_step(adam_theta, st.model.theta.values(), gtheta, cfg.warm_start_lr);
      nd::adam_step(adam_enc, st.encoder.values(), genc, cfg.warm_start_lr);
    } catch (const nd::NonFiniteError& e) {
      fail_step(-1, it, e.what());
    }
  }

  nd::Forward all = nd::forward(st.enc_spec, st.encoder, pr.v);
  st.latents = all.head_out[0];
}

StepLosses minibatch_step(TrainState& st, const Problem& pr, const std::vector<long>& batch,
                          const TrainConfig& cfg, RngStream& mc_rng) {
  if (batch.empty()) throw std::invalid_argument("minibatch_step: empty batch");
  const long B = static_cast<long>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);
  const auto& part = pr.partition;
  const int zd = part.total();
  BatchColumns c = gather(st, pr, batch);
  StepLosses out;

  // (a) covariate generator
  {
    GaussBatch gv = gauss_loglik_batch(st.model.cov_spec, st.model.theta, c.z, c.v);
    out.loss_v = -gv.sum_loglik * inv_b + nd::l2_penalty(st.model.cov_spec, st.model.theta);
    require_finite(out.loss_v, st.epoch, batch[0], "covariate");
    nd::Gradients g;
    nd::backward(st.model.cov_spec, st.model.theta, gv.fwd, {-inv_b * gv.dmu, -inv_b * gv.dvar}, g,
                 true, false);
    nd::add_l2_gradient(st.model.cov_spec, st.model.theta, g.param);
    try {
      nd::adam_step(st.adam_theta, st.model.theta.values(), g.param, cfg.lr_theta);
    } catch (const nd::NonFiniteError& e) {
      fail_step(st.epoch, batch[0], e.what());
    }
  }

  // (b) treatment generator
  {
    nd::Gradients g;
    if (pr.treatment_kind == TreatmentKind::Continuous) {
      GaussBatch gx = gauss_loglik_batch(st.model.treat_spec, st.model.phi, c.tin, c.x);
      out.loss_x = -gx.sum_loglik * inv_b + nd::l2_penalty(st.model.treat_spec, st.model.phi);
      require_finite(out.loss_x, st.epoch, batch[0], "treatment");
      nd::backward(st.model.treat_spec, st.model.phi, gx.fwd, {-inv_b * gx.dmu, -inv_b * gx.dvar},
                   g, true, false);
    } else {
      BernoulliBatch bx = bernoulli_loglik_batch(st.model.treat_spec, st.model.phi, c.tin, c.x);
      out.loss_x = -bx.sum_loglik * inv_b + nd::l2_penalty(st.model.treat_spec, st.model.phi);
      require_finite(out.loss_x, st.epoch, batch[0], "treatment");
      nd::backward(st.model.treat_spec, st.model.phi, bx.fwd, {-inv_b * bx.dlogit}, g, true, false);
    }
    nd::add_l2_gradient(st.model.treat_spec, st.model.phi, g.param);
    try {
      nd::adam_step(st.adam_phi, st.model.phi.values(), g.param, cfg.lr_phi);
    } catch (const nd::NonFiniteError& e) {
      fail_step(st.epoch, batch[0], e.what());
    }
  }

  out.y_active = st.epoch >= cfg.warmup_epochs;
  if (!out.y_active) return out;

  // (c) outcome generator; per-subject outcome-term values and latent
  // gradients are kept for the latent step (pre-update omega, Algorithm-2
  // semantics).
  VectorXd outcome_term(B);
  MatrixXd outcome_zgrad = MatrixXd::Zero(B, zd);
  {
    VectorXd omega_grad = VectorXd::Zero(st.model.omega.total_count());
    if (pr.objective == TrainObjective::Iv) {
      IvMcConfig mc{cfg.mc_train, cfg.reparameterize_for_latent};
      VectorXd eps(cfg.mc_train);
      const bool continuous = pr.treatment_kind == TreatmentKind::Continuous;
      for (long b = 0; b < B; ++b) {
        if (continuous)
          for (int m = 0; m < cfg.mc_train; ++m) eps[m] = mc_rng.normal();
        LogPivGrad g;
        const VectorXd z0 = c.z.row(b).segment(0, part.d0);
        const VectorXd z1 = c.z.row(b).segment(part.d0, part.d1);
        const VectorXd z2 = c.z.row(b).segment(part.d0 + part.d1, part.d2);
        try {
          outcome_term[b] = log_p_iv(st.model, c.w[b], z0, z1, z2, c.y[b], mc, nullptr, &g,
                                     continuous ? &eps : nullptr);
        } catch (const nd::NonFiniteError& e) {
          fail_step(st.epoch, batch[0], e.what());
        }
        omega_grad += g.omega;
        outcome_zgrad.row(b).segment(0, part.d0) = g.z0.transpose();
        outcome_zgrad.row(b).segment(part.d0, part.d1) = g.z1.transpose();
        outcome_zgrad.row(b).segment(part.d0 + part.d1, part.d2) = g.z2.transpose();
      }
      omega_grad *= -inv_b;
    } else {
      MatrixXd oin(B, part.d0 + part.d1 + 1);
      oin.leftCols(part.d0 + part.d1) = c.z.leftCols(part.d0 + part.d1);
      oin.col(part.d0 + part.d1) = c.x;
      GaussBatch gy = gauss_loglik_batch(st.model.out_spec, st.model.omega, oin, c.y);
      outcome_term = gy.row_loglik;
      nd::Gradients g;
      nd::backward(st.model.out_spec, st.model.omega, gy.fwd, {gy.dmu, gy.dvar}, g, true, true);
      omega_grad = -inv_b * g.param;
      outcome_zgrad.leftCols(part.d0 + part.d1) = g.input.leftCols(part.d0 + part.d1);
    }
    out.loss_y = -outcome_term.mean() + nd::l2_penalty(st.model.out_spec, st.model.omega);
    require_finite(out.loss_y, st.epoch, batch[0], "outcome");
    nd::add_l2_gradient(st.model.out_spec, st.model.omega, omega_grad);
    try {
      nd::adam_step(st.adam_omega, st.model.omega.values(), omega_grad, cfg.lr_omega);
    } catch (const nd::NonFiniteError& e) {
      fail_step(st.epoch, batch[0], e.what());
    }
  }

  // (d) latent ascent with post-update theta and phi
  {
    GaussBatch gv = gauss_loglik_batch(st.model.cov_spec, st.model.theta, c.z, c.v);
    nd::Gradients gvz;
    nd::backward(st.model.cov_spec, st.model.theta, gv.fwd, {gv.dmu, gv.dvar}, gvz, false, true);

    VectorXd treat_row(B);
    MatrixXd treat_in_grad;
    if (pr.treatment_kind == TreatmentKind::Continuous) {
      GaussBatch gx = gauss_loglik_batch(st.model.treat_spec, st.model.phi, c.tin, c.x);
      treat_row = gx.row_loglik;
      nd::Gradients g;
      nd::backward(st.model.treat_spec, st.model.phi, gx.fwd, {gx.dmu, gx.dvar}, g, false, true);
      treat_in_grad = std::move(g.input);
    } else {
      BernoulliBatch bx = bernoulli_loglik_batch(st.model.treat_spec, st.model.phi, c.tin, c.x);
      treat_row = bx.row_loglik;
      nd::Gradients g;
      nd::backward(st.model.treat_spec, st.model.phi, bx.fwd, {bx.dlogit}, g, false, true);
      treat_in_grad = std::move(g.input);
    }

    double latent_obj = 0.0;
    for (long b = 0; b < B; ++b) {
      const long i = batch[b];
      const double prior = log_prior(st.latents.row(i).transpose());
      latent_obj +=
          cfg.pzv_weight * (prior + gv.row_loglik[b]) + treat_row[b] + outcome_term[b];

      VectorXd grad =
          cfg.pzv_weight * (gvz.input.row(b).transpose() - st.latents.row(i).transpose());
      grad.segment(0, part.d0) += treat_in_grad.row(b).segment(0, part.d0).transpose();
      grad.segment(part.d0 + part.d1, part.d2) +=
          treat_in_grad.row(b).segment(part.d0, part.d2).transpose();
      grad += outcome_zgrad.row(b).transpose();
      if (!grad.allFinite()) fail_step(st.epoch, batch[0], "latent gradient non-finite");
      latent_adam_ascent(st, i, grad, cfg.lr_latent);
    }
    out.latent_obj = latent_obj * inv_b;
  }
  return out;
}

FittedModel to_fitted(const TrainState& st, const Problem& pr, const TrainConfig& cfg) {
  FittedModel fm;
  fm.model = st.model;
  fm.enc_spec = st.enc_spec;
  fm.encoder = st.encoder;
  fm.has_encoder = cfg.warm_start == WarmStartMode::SimplifiedEgm;
  fm.scaler = pr.scaler;
  fm.objective = pr.objective;
  return fm;
}

TrainResult train(const Problem& pr, const TrainConfig& cfg, const bench::EvaluationGrid* grid,
                  const MapConfig& map_cfg) {
  cfg.validate();
  TrainState st = init_state(pr, cfg);
  TrainHistory hist;
  warm_start(st, pr, cfg, &hist);

  const long n = pr.n();
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    st.epoch = epoch;
    RngStream shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    fisher_yates(order, shuffle_rng);

    double sv = 0, sx = 0, sy = 0, sl = 0;
    long nb = 0;
    for (long start = 0; start < n; start += cfg.batch_size) {
      const long end = std::min<long>(start + cfg.batch_size, n);
      std::vector<long> batch(order.begin() + start, order.begin() + end);
      RngStream mc(derive_seed(cfg.seed, "mc", epoch, start / cfg.batch_size));
      StepLosses losses = minibatch_step(st, pr, batch, cfg, mc);
      sv += losses.loss_v;
      sx += losses.loss_x;
      sy += losses.loss_y;
      sl += losses.latent_obj;
      ++nb;
    }

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      EvalRecord rec;
      rec.epoch = epoch;
      rec.loss_v = sv / nb;
      rec.loss_x = sx / nb;
      rec.loss_y = sy / nb;
      rec.latent_obj = sl / nb;
      if (grid) {
        FittedModel fm = to_fitted(st, pr, cfg);
        MseResult mse = structural_mse(fm, *grid, map_cfg);
        rec.has_mse = true;
        rec.mse = mse.mse;
        rec.map_warnings = mse.map_warnings;
      }
      hist.checkpoints.push_back(rec);
    }
  }

  TrainResult res{to_fitted(st, pr, cfg), std::move(hist)};
  return res;
}

}  // namespace bgmiv::train
