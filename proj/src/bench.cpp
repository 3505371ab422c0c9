#include "bgmiv/bench.hpp"

#include <cmath>
#include <stdexcept>

namespace bgmiv::bench {

double psi(double t) {
  const double d = t - 5.0;
  return 2.0 * (std::pow(d, 4) / 600.0 + std::exp(-4.0 * d * d) + t / 10.0 - 2.0);
}

double structural_f0(double p, double t, double s) {
  const double sr = std::round(s);
  if (sr < 1.0 || sr > 7.0 || s != sr)
    throw std::invalid_argument("structural_f0: customer group must be an integer in 1..7");
  return 100.0 + (10.0 + p) * s * psi(t) - 2.0 * p;
}

namespace {

struct DemandDraws {
  int s;
  double t, c, u, eta;
};

// one subject's base draws; order fixed for reproducibility: s, t, c, u, eta
DemandDraws draw_subject(RngStream& rng) {
  DemandDraws d;
  d.s = 1 + static_cast<int>(rng.below(7));
  d.t = 10.0 * rng.u01();
  d.c = rng.normal();
  d.u = rng.normal();
  d.eta = rng.normal();
  return d;
}

void fill_outcome(Dataset& ds, long i, const DemandDraws& d, double rho) {
  const double ps = psi(d.t);
  const double p = 25.0 + (d.c + 3.0) * ps + d.u;
  const double eps = rho * d.u + std::sqrt(1.0 - rho * rho) * d.eta;
  ds.x[i] = p;
  ds.y[i] = structural_f0(p, d.t, d.s) + eps;
  ds.w[i] = d.c;
  ds.diag.u[i] = d.u;
  ds.diag.eps[i] = eps;
  ds.diag.t[i] = d.t;
  ds.diag.s[i] = d.s;
}

Dataset alloc_dataset(long n, int v_dim) {
  Dataset ds;
  ds.x.resize(n);
  ds.y.resize(n);
  ds.w.resize(n);
  ds.v.resize(n, v_dim);
  ds.diag.u.resize(n);
  ds.diag.eps.resize(n);
  ds.diag.t.resize(n);
  ds.diag.s.resize(n);
  return ds;
}

MatrixXd draw_prototypes(std::uint64_t feature_seed, int proxy_dim) {
  RngStream rng(derive_seed(feature_seed, "prototypes"));
  MatrixXd mu(7, proxy_dim);
  for (int s = 0; s < 7; ++s)
    for (int j = 0; j < proxy_dim; ++j) mu(s, j) = rng.normal();
  return mu;
}

void check_config(const DemandConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("gen_demand: n must be >= 1");
  if (cfg.rho < 0.0 || cfg.rho > 1.0) throw std::invalid_argument("gen_demand: rho must be in [0,1]");
  if (cfg.variant == Variant::VectorProxy && cfg.proxy_dim < 1)
    throw std::invalid_argument("gen_demand: proxy_dim must be >= 1");
}

}  // namespace

Dataset gen_demand(const DemandConfig& cfg) {
  check_config(cfg);
  RngStream rng(derive_seed(cfg.seed, "demand"));
  Dataset ds = alloc_dataset(cfg.n, 2);
  for (long i = 0; i < cfg.n; ++i) {
    const DemandDraws d = draw_subject(rng);
    fill_outcome(ds, i, d, cfg.rho);
    ds.v(i, 0) = d.t;
    ds.v(i, 1) = static_cast<double>(d.s);
  }
  ds.scaler_kind = ScalerKind::StandardizeFit;
  return ds;
}

Dataset gen_vector_proxy(const DemandConfig& cfg) {
  check_config(cfg);
  const int D = cfg.proxy_dim;
  const MatrixXd proto = draw_prototypes(cfg.feature_seed, D);
  RngStream rng(derive_seed(cfg.seed, "demand"));
  Dataset ds = alloc_dataset(cfg.n, 1 + D);
  for (long i = 0; i < cfg.n; ++i) {
    const DemandDraws d = draw_subject(rng);
    fill_outcome(ds, i, d, cfg.rho);
    ds.v(i, 0) = d.t;
    for (int j = 0; j < D; ++j) ds.v(i, 1 + j) = proto(d.s - 1, j) + cfg.sigma_rep * rng.normal();
  }
  ds.scaler_kind = ScalerKind::FixedDfiv;
  if (cfg.nuisance_dim > 0)
    return augment_nuisance(ds, cfg.nuisance_dim, derive_seed(cfg.seed, "nuisance"));
  return ds;
}

Dataset augment_nuisance(const Dataset& d, int k, std::uint64_t seed) {
  if (k < 0) throw std::invalid_argument("augment_nuisance: k must be >= 0");
  if (k == 0) return d;
  Dataset out = d;
  RngStream rng(derive_seed(seed, "nuisance-cols"));
  const long n = d.n();
  out.v.resize(n, d.v.cols() + k);
  out.v.leftCols(d.v.cols()) = d.v;
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out.v(i, d.v.cols() + j) = rng.normal();
  return out;
}

EvaluationGrid evaluation_grid(Variant variant, std::uint64_t feature_seed, int proxy_dim,
                               double sigma_rep, int nuisance_dim) {
  const int np = 20, nt = 20, ns = 7;
  VectorXd prices = VectorXd::LinSpaced(np, 10.0, 25.0);
  VectorXd times = VectorXd::LinSpaced(nt, 0.0, 10.0);

  const int base_dim = variant == Variant::Lowdim ? 2 : 1 + proxy_dim;
  const int v_dim = base_dim + (variant == Variant::VectorProxy ? nuisance_dim : 0);

  // one covariate vector per (t,s) cell, shared across the 20 prices
  MatrixXd cell_v(nt * ns, v_dim);
  if (variant == Variant::Lowdim) {
    for (int j = 0; j < nt; ++j)
      for (int s = 1; s <= ns; ++s) {
        const int c = j * ns + (s - 1);
        cell_v(c, 0) = times[j];
        cell_v(c, 1) = s;
      }
  } else {
    const MatrixXd proto = draw_prototypes(feature_seed, proxy_dim);
    RngStream rng(derive_seed(feature_seed, "grid-proxy"));
    RngStream nrng(derive_seed(feature_seed, "grid-nuisance"));
    for (int j = 0; j < nt; ++j)
      for (int s = 1; s <= ns; ++s) {
        const int c = j * ns + (s - 1);
        cell_v(c, 0) = times[j];
        for (int d = 0; d < proxy_dim; ++d)
          cell_v(c, 1 + d) = proto(s - 1, d) + sigma_rep * rng.normal();
        for (int d = 0; d < nuisance_dim; ++d) cell_v(c, 1 + proxy_dim + d) = nrng.normal();
      }
  }

  EvaluationGrid g;
  const long R = static_cast<long>(np) * nt * ns;
  g.x.resize(R);
  g.g0.resize(R);
  g.v.resize(R, v_dim);
  long r = 0;
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nt; ++j)
      for (int s = 1; s <= ns; ++s, ++r) {
        g.x[r] = prices[i];
        g.g0[r] = structural_f0(prices[i], times[j], s);
        g.v.row(r) = cell_v.row(j * ns + (s - 1));
      }
  return g;
}

Dataset gen_linear_iv(const LinearIvConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("gen_linear_iv: n must be >= 1");
  if (cfg.gamma == 0.0)
    throw std::invalid_argument("gen_linear_iv: gamma must be nonzero (instrument relevance)");
  RngStream rng(derive_seed(cfg.seed, "linear-iv"));
  Dataset ds = alloc_dataset(cfg.n, 0);
  for (long i = 0; i < cfg.n; ++i) {
    const double w = rng.normal();
    const double u = rng.normal();
    const double eta = rng.normal();
    const double x = cfg.gamma * w + u;
    const double eps = cfg.rho * u + std::sqrt(1.0 - cfg.rho * cfg.rho) * eta;
    ds.x[i] = x;
    ds.y[i] = cfg.beta * x + eps;
    ds.w[i] = w;
    ds.diag.u[i] = u;
    ds.diag.eps[i] = eps;
    ds.diag.t[i] = 0.0;
    ds.diag.s[i] = 0;
  }
  ds.scaler_kind = ScalerKind::Identity;
  return ds;
}

}  // namespace bgmiv::bench
