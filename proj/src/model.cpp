#include "bgmiv/model.hpp"

#include <cmath>
#include <stdexcept>

namespace bgmiv {

namespace {

double gauss_logpdf(double y, double mu, double var) {
  const double d = y - mu;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// log sigmoid / log(1-sigmoid) without overflow
double log_sigmoid(double l) { return -nd::softplus(-l); }
double log_one_minus_sigmoid(double l) { return -nd::softplus(l); }

}  // namespace

void LatentPartition::validate() const {
  if (d0 < 0 || d1 < 0 || d2 < 0 || d3 < 0)
    throw std::invalid_argument("LatentPartition: negative block dimension");
  if (total() < 1) throw std::invalid_argument("LatentPartition: total latent dim must be >= 1");
}

VectorXd BgmIvModel::treat_input(const Eigen::Ref<const VectorXd>& z0,
                                 const Eigen::Ref<const VectorXd>& z2, double w) const {
  VectorXd in(partition.d0 + partition.d2 + 1);
  in << z0, z2, w;
  return in;
}

VectorXd BgmIvModel::out_input(const Eigen::Ref<const VectorXd>& z0,
                               const Eigen::Ref<const VectorXd>& z1, double x) const {
  VectorXd in(partition.d0 + partition.d1 + 1);
  in << z0, z1, x;
  return in;
}

BgmIvModel make_bgm_iv_model(const LatentPartition& part, int covariate_dim, TreatmentKind kind) {
  part.validate();
  if (covariate_dim < 1) throw std::invalid_argument("covariate_dim must be >= 1");
  BgmIvModel m;
  m.partition = part;
  m.treatment_kind = kind;

  m.cov_spec.name = "covariate_net";
  m.cov_spec.input_dim = part.total();
  m.cov_spec.hidden_widths = {64, 64, 64, 64, 64};
  m.cov_spec.heads = {{"mean", covariate_dim, nd::HeadTransform::Identity, 0.0},
                      {"rawvar", covariate_dim, nd::HeadTransform::Softplus, 1e-4}};
  m.cov_spec.l2_coefficient = 1e-4;

  m.treat_spec.name = "treatment_net";
  m.treat_spec.input_dim = part.d0 + part.d2 + 1;
  m.treat_spec.hidden_widths = {64, 32, 8};
  if (kind == TreatmentKind::Continuous) {
    m.treat_spec.heads = {{"mean", 1, nd::HeadTransform::Identity, 0.0},
                          {"rawvar", 1, nd::HeadTransform::Softplus, 1e-4}};
  } else {
    m.treat_spec.heads = {{"logit", 1, nd::HeadTransform::Identity, 0.0}};
  }
  m.treat_spec.l2_coefficient = 1e-4;

  m.out_spec.name = "outcome_net";
  m.out_spec.input_dim = part.d0 + part.d1 + 1;
  m.out_spec.hidden_widths = {64, 32, 8};
  m.out_spec.heads = {{"mean", 1, nd::HeadTransform::Identity, 0.0},
                      {"rawvar", 1, nd::HeadTransform::Softplus, 1e-4}};
  m.out_spec.l2_coefficient = 1e-4;

  m.theta = nd::ParameterSet(m.cov_spec);
  m.phi = nd::ParameterSet(m.treat_spec);
  m.omega = nd::ParameterSet(m.out_spec);
  return m;
}

double log_prior(const Eigen::Ref<const VectorXd>& z) {
  return -0.5 * (kLog2Pi * static_cast<double>(z.size()) + z.squaredNorm());
}

GaussBatch gauss_loglik_batch(const nd::NetworkSpec& spec, const nd::ParameterSet& params,
                              const Eigen::Ref<const MatrixXd>& inputs,
                              const Eigen::Ref<const MatrixXd>& targets) {
  GaussBatch b;
  b.fwd = nd::forward(spec, params, inputs);
  const MatrixXd& mu = b.fwd.head_out[0];
  const MatrixXd& var = b.fwd.head_out[1];
  if (targets.rows() != mu.rows() || targets.cols() != mu.cols())
    throw std::invalid_argument(spec.name + ": target shape does not match mean head");
  const Eigen::ArrayXXd d = targets.array() - mu.array();
  const Eigen::ArrayXXd va = var.array();
  Eigen::ArrayXXd ll = -0.5 * (kLog2Pi + va.log() + d.square() / va);
  b.row_loglik = ll.rowwise().sum();
  b.sum_loglik = b.row_loglik.sum();
  b.dmu = (d / va).matrix();
  b.dvar = ((d.square() / va - 1.0) / (2.0 * va)).matrix();
  return b;
}

double log_p_v(const BgmIvModel& m, const Eigen::Ref<const VectorXd>& z,
               const Eigen::Ref<const VectorXd>& v, LogPvGrad* grad) {
  if (v.size() != m.covariate_dim())
    throw std::invalid_argument("log_p_v: covariate dim mismatch");
  GaussBatch b = gauss_loglik_batch(m.cov_spec, m.theta, z.transpose(), v.transpose());
  if (!std::isfinite(b.sum_loglik))
    throw nd::NonFiniteError("log_p_v: non-finite likelihood (check variance head)");
  if (grad) {
    nd::Gradients g;
    nd::backward(m.cov_spec, m.theta, b.fwd, {b.dmu, b.dvar}, g, true, true);
    grad->theta = std::move(g.param);
    grad->z = g.input.row(0).transpose();
  }
  return b.sum_loglik;
}

double log_p_x(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
               const Eigen::Ref<const VectorXd>& z2, double x, LogPxGrad* grad) {
  const VectorXd in = m.treat_input(z0, z2, w);
  nd::Forward f = nd::forward(m.treat_spec, m.phi, in.transpose(), /*check_finite=*/true);
  double ll;
  MatrixXd cot0(1, 1), cot1;
  if (m.treatment_kind == TreatmentKind::Continuous) {
    const double mu = f.head_out[0](0, 0), var = f.head_out[1](0, 0);
    ll = gauss_logpdf(x, mu, var);
    const double d = x - mu;
    cot0(0, 0) = d / var;
    cot1 = MatrixXd::Constant(1, 1, (d * d / var - 1.0) / (2.0 * var));
  } else {
    if (x != 0.0 && x != 1.0) throw std::invalid_argument("log_p_x: binary treatment must be 0 or 1");
    const double logit = f.head_out[0](0, 0);
    ll = x == 1.0 ? log_sigmoid(logit) : log_one_minus_sigmoid(logit);
    const double pi = nd::sigmoid(logit);
    cot0(0, 0) = x == 1.0 ? 1.0 - pi : -pi;
  }
  if (grad) {
    nd::Gradients g;
    std::vector<MatrixXd> cots = {cot0};
    if (m.treatment_kind == TreatmentKind::Continuous) cots.push_back(cot1);
    nd::backward(m.treat_spec, m.phi, f, cots, g, true, true);
    grad->phi = std::move(g.param);
    grad->z0 = g.input.row(0).segment(0, m.partition.d0).transpose();
    grad->z2 = g.input.row(0).segment(m.partition.d0, m.partition.d2).transpose();
    grad->w = g.input(0, m.partition.d0 + m.partition.d2);
  }
  return ll;
}

double log_p_y(const BgmIvModel& m, double x, const Eigen::Ref<const VectorXd>& z0,
               const Eigen::Ref<const VectorXd>& z1, double y, LogPyGrad* grad) {
  const VectorXd in = m.out_input(z0, z1, x);
  nd::Forward f = nd::forward(m.out_spec, m.omega, in.transpose(), /*check_finite=*/true);
  const double mu = f.head_out[0](0, 0), var = f.head_out[1](0, 0);
  const double ll = gauss_logpdf(y, mu, var);
  if (grad) {
    const double d = y - mu;
    MatrixXd cmu = MatrixXd::Constant(1, 1, d / var);
    MatrixXd cvar = MatrixXd::Constant(1, 1, (d * d / var - 1.0) / (2.0 * var));
    nd::Gradients g;
    nd::backward(m.out_spec, m.omega, f, {cmu, cvar}, g, true, true);
    grad->omega = std::move(g.param);
    grad->z0 = g.input.row(0).segment(0, m.partition.d0).transpose();
    grad->z1 = g.input.row(0).segment(m.partition.d0, m.partition.d1).transpose();
    grad->x = g.input(0, m.partition.d0 + m.partition.d1);
  }
  return ll;
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_mean_exp: empty input");
  double c = values[0];
  for (double v : values)
    if (v > c) c = v;
  double s = 0.0;
  for (double v : values) s += std::exp(v - c);
  return c + std::log(s) - std::log(static_cast<double>(values.size()));
}

namespace {

// Continuous-treatment IV term: log mean_m N(y; mu_w(x_m), var_w(x_m)) with
// x_m = mu_phi + sigma_phi * eps_m. The M samples stream through in
// cache-resident chunks with a running (max, denominator) for the
// log-sum-exp; gradient accumulators are rescaled whenever the running max
// moves, so one pass serves both the omega gradient and the latent/sample
// gradients at any M.
double log_p_iv_continuous(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
                           const Eigen::Ref<const VectorXd>& z1, const Eigen::Ref<const VectorXd>& z2,
                           double y, const IvMcConfig& cfg, RngStream* rng, LogPivGrad* grad,
                           const VectorXd* fixed_eps) {
  const int M = fixed_eps ? static_cast<int>(fixed_eps->size()) : cfg.mc_samples;
  if (M < 1) throw std::invalid_argument("log_p_iv: mc_samples must be >= 1");
  if (!fixed_eps && !rng)
    throw std::invalid_argument("log_p_iv: continuous treatment needs an rng stream or fixed draws");

  const VectorXd tin = m.treat_input(z0, z2, w);
  nd::Forward tf = nd::forward(m.treat_spec, m.phi, tin.transpose());
  const double mu_phi = tf.head_out[0](0, 0);
  const double var_phi = tf.head_out[1](0, 0);
  const double sd_phi = std::sqrt(var_phi);

  VectorXd eps(M);
  if (fixed_eps)
    eps = *fixed_eps;
  else
    for (int i = 0; i < M; ++i) eps[i] = rng->normal();

  const int d01 = m.partition.d0 + m.partition.d1;
  const int chunk = std::min(M, 128);
  const auto& spec = m.out_spec;
  const int L = spec.hidden_count();
  const int mean_l = L, var_l = L + 1;  // head layer indices in the flat layout
  const double slope = spec.leaky_slope;
  const double var_floor = spec.heads[1].floor;

  double gmax = -std::numeric_limits<double>::infinity();
  double denom = 0.0;
  nd::Gradients g;  // unnormalized accumulators, rescaled with the running max
  VectorXd dz01 = VectorXd::Zero(d01);
  double dmu_acc = 0.0, deps_acc = 0.0;
  const bool want = grad != nullptr;
  if (want) g.param = VectorXd::Zero(m.omega.total_count());

  // With z fixed across the M samples, layer 1 is affine in the scalar x:
  // its pre-activation rows are base1 + x_m * w1x, and both its weight
  // gradient and the sample-side input gradients reduce to contractions of
  // delta1 against (z01, x, eps).
  VectorXd z01(d01);
  z01 << z0, z1;
  Eigen::RowVectorXd base1, w1x;
  if (L > 0) {
    base1 = z01.transpose() * m.omega.weight(0).topRows(d01) + m.omega.bias(0).transpose();
    w1x = m.omega.weight(0).row(d01);
  }

  std::vector<MatrixXd> H(L), D(L);  // post-activations / deltas, chunk rows
  MatrixXd raw_mu, raw_var, oin_affine;
  auto size_buffers = [&](int rows) {
    for (int l = 0; l < L; ++l) {
      H[l].resize(rows, spec.hidden_widths[l]);
      D[l].resize(rows, spec.hidden_widths[l]);
    }
    raw_mu.resize(rows, 1);
    raw_var.resize(rows, 1);
    if (L == 0) {
      oin_affine.resize(rows, d01 + 1);
      oin_affine.leftCols(d01).rowwise() = z01.transpose();
    }
  };
  size_buffers(std::min(chunk, M));

  auto param_at = [&](int layer, bool bias_part) -> std::ptrdiff_t {
    return (bias_part ? m.omega.bias(layer).data() : m.omega.weight(layer).data()) -
           m.omega.values().data();
  };

  for (int start = 0; start < M; start += chunk) {
    const int c = std::min(chunk, M - start);
    if (c != raw_mu.rows()) size_buffers(c);  // tail chunk only
    const VectorXd x_c = mu_phi + sd_phi * eps.segment(start, c).array();

    // forward
    if (L > 0) {
      H[0].noalias() = x_c * w1x;
      H[0].rowwise() += base1;
      nd::activation_forward(H[0], spec.activation, slope);
      for (int l = 1; l < L; ++l) {
        H[l].noalias() = H[l - 1] * m.omega.weight(l);
        H[l].rowwise() += m.omega.bias(l).transpose();
        nd::activation_forward(H[l], spec.activation, slope);
      }
      raw_mu.noalias() = H[L - 1] * m.omega.weight(mean_l);
      raw_var.noalias() = H[L - 1] * m.omega.weight(var_l);
    } else {
      oin_affine.col(d01) = x_c;
      raw_mu.noalias() = oin_affine * m.omega.weight(mean_l);
      raw_var.noalias() = oin_affine * m.omega.weight(var_l);
    }
    raw_mu.array() += m.omega.bias(mean_l)(0);
    raw_var.array() += m.omega.bias(var_l)(0);

    const auto mu = raw_mu.col(0).array();
    const auto rv = raw_var.col(0).array();
    const Eigen::ArrayXd var = rv.max(0.0) + (1.0 + (-rv.abs()).exp()).log() + var_floor;
    const Eigen::ArrayXd d = y - mu;
    const Eigen::ArrayXd ll = -0.5 * (kLog2Pi + var.log() + d.square() / var);

    const double cmax = ll.maxCoeff();
    if (cmax > gmax) {
      const double alpha = std::isfinite(gmax) ? std::exp(gmax - cmax) : 0.0;
      denom *= alpha;
      if (want) {
        g.param *= alpha;
        dz01 *= alpha;
        dmu_acc *= alpha;
        deps_acc *= alpha;
      }
      gmax = cmax;
    }
    // terms more than 700 nats below the max are zero to double precision;
    // dropping them keeps the weights out of denormal territory
    Eigen::ArrayXd wts = (ll - gmax).max(-700.0).exp();
    for (int i = 0; i < c; ++i)
      if (ll[i] - gmax < -700.0) wts[i] = 0.0;
    denom += wts.sum();

    if (!want) continue;

    // backward with weighted Gaussian head cotangents
    const MatrixXd cmu = (wts * d / var).matrix();
    const MatrixXd cvar = ((wts * (d.square() / var - 1.0) / (2.0 * var)) *
                           (1.0 + (-rv).exp()).inverse())
                              .matrix();
    const MatrixXd& last = L > 0 ? H[L - 1] : oin_affine;
    {
      Eigen::Map<nd::RowMat> gw_mu(g.param.data() + param_at(mean_l, false), last.cols(), 1);
      Eigen::Map<nd::RowMat> gw_var(g.param.data() + param_at(var_l, false), last.cols(), 1);
      gw_mu.noalias() += last.transpose() * cmu;
      gw_var.noalias() += last.transpose() * cvar;
      g.param(param_at(mean_l, true)) += cmu.sum();
      g.param(param_at(var_l, true)) += cvar.sum();
    }
    if (L == 0) {
      const VectorXd wz = m.omega.weight(mean_l).col(0).head(d01) * cmu.sum() +
                          m.omega.weight(var_l).col(0).head(d01) * cvar.sum();
      dz01 += wz;
      const double wx_mu = m.omega.weight(mean_l)(d01, 0);
      const double wx_var = m.omega.weight(var_l)(d01, 0);
      dmu_acc += cmu.sum() * wx_mu + cvar.sum() * wx_var;
      deps_acc += (cmu.col(0).array() * eps.segment(start, c).array()).sum() * wx_mu +
                  (cvar.col(0).array() * eps.segment(start, c).array()).sum() * wx_var;
      continue;
    }

    D[L - 1].noalias() = cmu * m.omega.weight(mean_l).transpose();
    D[L - 1].noalias() += cvar * m.omega.weight(var_l).transpose();
    for (int l = L - 1; l >= 1; --l) {
      nd::activation_backward(D[l], H[l], spec.activation, slope);
      Eigen::Map<nd::RowMat> gw(g.param.data() + param_at(l, false), H[l - 1].cols(), H[l].cols());
      gw.noalias() += H[l - 1].transpose() * D[l];
      Eigen::Map<VectorXd> gb(g.param.data() + param_at(l, true), H[l].cols());
      gb.noalias() += D[l].colwise().sum().transpose();
      D[l - 1].noalias() = D[l] * m.omega.weight(l).transpose();
    }
    nd::activation_backward(D[0], H[0], spec.activation, slope);
    const Eigen::RowVectorXd colsum = D[0].colwise().sum();
    Eigen::Map<nd::RowMat> gw1(g.param.data() + param_at(0, false), d01 + 1, spec.hidden_widths[0]);
    gw1.topRows(d01).noalias() += z01 * colsum;
    gw1.row(d01).noalias() += x_c.transpose() * D[0];
    Eigen::Map<VectorXd> gb1(g.param.data() + param_at(0, true), spec.hidden_widths[0]);
    gb1.noalias() += colsum.transpose();
    dz01.noalias() += m.omega.weight(0).topRows(d01) * colsum.transpose();
    dmu_acc += colsum.dot(w1x);
    deps_acc += (eps.segment(start, c).transpose() * D[0]).dot(w1x);
  }

  const double value = gmax + std::log(denom) - std::log(static_cast<double>(M));
  if (!std::isfinite(value)) throw nd::NonFiniteError("log_p_iv: non-finite Monte Carlo estimate");

  if (want) {
    grad->omega = g.param / denom;
    grad->z0 = dz01.head(m.partition.d0) / denom;
    grad->z1 = dz01.segment(m.partition.d0, m.partition.d1) / denom;
    grad->z2 = VectorXd::Zero(m.partition.d2);
    grad->phi = VectorXd::Zero(m.phi.total_count());
    grad->w = 0.0;
    if (cfg.reparameterize_for_latent) {
      const double dmu_phi = dmu_acc / denom;
      const double dvar_phi = deps_acc / denom / (2.0 * sd_phi);
      nd::Gradients tg;
      nd::backward(m.treat_spec, m.phi, tf,
                   {MatrixXd::Constant(1, 1, dmu_phi), MatrixXd::Constant(1, 1, dvar_phi)}, tg, true,
                   true);
      grad->phi = std::move(tg.param);
      grad->z0 += tg.input.row(0).segment(0, m.partition.d0).transpose();
      grad->z2 = tg.input.row(0).segment(m.partition.d0, m.partition.d2).transpose();
      grad->w = tg.input(0, m.partition.d0 + m.partition.d2);
    }
  }
  return value;
}

double log_p_iv_binary(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
                       const Eigen::Ref<const VectorXd>& z1, const Eigen::Ref<const VectorXd>& z2,
                       double y, LogPivGrad* grad) {
  const VectorXd tin = m.treat_input(z0, z2, w);
  nd::Forward tf = nd::forward(m.treat_spec, m.phi, tin.transpose());
  const double logit = tf.head_out[0](0, 0);

  const int d01 = m.partition.d0 + m.partition.d1;
  MatrixXd oin(2, d01 + 1);
  oin.leftCols(m.partition.d0).rowwise() = z0.transpose();
  oin.middleCols(m.partition.d0, m.partition.d1).rowwise() = z1.transpose();
  oin(0, d01) = 0.0;
  oin(1, d01) = 1.0;
  nd::Forward of = nd::forward(m.out_spec, m.omega, oin);

  double comp[2];
  for (int i = 0; i < 2; ++i)
    comp[i] = gauss_logpdf(y, of.head_out[0](i, 0), of.head_out[1](i, 0));
  const double lw0 = log_one_minus_sigmoid(logit) + comp[0];
  const double lw1 = log_sigmoid(logit) + comp[1];
  const double c = std::max(lw0, lw1);
  const double value = c + std::log(std::exp(lw0 - c) + std::exp(lw1 - c));
  if (!std::isfinite(value)) throw nd::NonFiniteError("log_p_iv: non-finite binary mixture");

  if (grad) {
    const double s0 = std::exp(lw0 - value);
    const double s1 = std::exp(lw1 - value);
    MatrixXd cmu(2, 1), cvar(2, 1);
    for (int i = 0; i < 2; ++i) {
      const double s = i == 0 ? s0 : s1;
      const double mu = of.head_out[0](i, 0), var = of.head_out[1](i, 0), d = y - mu;
      cmu(i, 0) = s * d / var;
      cvar(i, 0) = s * (d * d / var - 1.0) / (2.0 * var);
    }
    nd::Gradients g;
    nd::backward(m.out_spec, m.omega, of, {cmu, cvar}, g, true, true);
    grad->omega = std::move(g.param);
    grad->z0 = g.input.leftCols(m.partition.d0).colwise().sum().transpose();
    grad->z1 = g.input.middleCols(m.partition.d0, m.partition.d1).colwise().sum().transpose();

    const double pi = nd::sigmoid(logit);
    const double dlogit = s1 * (1.0 - pi) - s0 * pi;
    nd::Gradients tg;
    nd::backward(m.treat_spec, m.phi, tf, {MatrixXd::Constant(1, 1, dlogit)}, tg, true, true);
    grad->phi = std::move(tg.param);
    grad->z0 += tg.input.row(0).segment(0, m.partition.d0).transpose();
    grad->z2 = tg.input.row(0).segment(m.partition.d0, m.partition.d2).transpose();
    grad->w = tg.input(0, m.partition.d0 + m.partition.d2);
  }
  return value;
}

}  // namespace

double log_p_iv(const BgmIvModel& m, double w, const Eigen::Ref<const VectorXd>& z0,
                const Eigen::Ref<const VectorXd>& z1, const Eigen::Ref<const VectorXd>& z2, double y,
                const IvMcConfig& cfg, RngStream* rng, LogPivGrad* grad, const VectorXd* fixed_eps) {
  if (cfg.mc_samples < 1) throw std::invalid_argument("log_p_iv: mc_samples must be >= 1");
  if (m.treatment_kind == TreatmentKind::Binary)
    return log_p_iv_binary(m, w, z0, z1, z2, y, grad);
  return log_p_iv_continuous(m, w, z0, z1, z2, y, cfg, rng, grad, fixed_eps);
}

double log_quasi_posterior(const BgmIvModel& m, const LatentState& state, double x, double y,
                           const Eigen::Ref<const VectorXd>& v, double w, const IvMcConfig& cfg,
                           double pzv_weight, RngStream* rng, VectorXd* z_grad,
                           const VectorXd* fixed_eps) {
  if (pzv_weight < 0.0 || pzv_weight > 1.0)
    throw std::invalid_argument("log_quasi_posterior: pzv_weight must be in [0,1]");
  const auto& part = m.partition;
  if (state.z.size() != part.total())
    throw std::invalid_argument("log_quasi_posterior: latent dim mismatch");

  LogPvGrad vg;
  LogPxGrad xg;
  LogPivGrad ivg;
  const bool want = z_grad != nullptr;

  const double lp = log_prior(state.z);
  const double lv = log_p_v(m, state.z, v, want ? &vg : nullptr);
  const double lx = log_p_x(m, w, state.z0(), state.z2(), x, want ? &xg : nullptr);
  const double liv =
      log_p_iv(m, w, state.z0(), state.z1(), state.z2(), y, cfg, rng, want ? &ivg : nullptr, fixed_eps);

  if (want) {
    VectorXd g = pzv_weight * (vg.z - state.z);
    g.segment(0, part.d0) += xg.z0 + ivg.z0;
    g.segment(part.d0, part.d1) += ivg.z1;
    g.segment(part.d0 + part.d1, part.d2) += xg.z2 + ivg.z2;
    *z_grad = std::move(g);
  }
  return pzv_weight * (lp + lv) + lx + liv;
}

}  // namespace bgmiv
