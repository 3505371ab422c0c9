#include "bgmiv/infer.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace bgmiv {

namespace {

MatrixXd initial_latents(const FittedModel& fm, const Eigen::Ref<const MatrixXd>& v,
                         MapConfig::Init init) {
  const long n = v.rows();
  const int zd = fm.model.latent_dim();
  if (init == MapConfig::Init::Encoder && fm.has_encoder) {
    nd::Forward f = nd::forward(fm.enc_spec, fm.encoder, v);
    return f.head_out[0];
  }
  return MatrixXd::Zero(n, zd);
}

}  // namespace

MapResult map_latent(const FittedModel& fm, const Eigen::Ref<const MatrixXd>& v_scaled,
                     const MapConfig& cfg) {
  if (cfg.steps < 0) throw std::invalid_argument("map_latent: steps must be >= 0");
  nd::tune_allocator();
  const long n = v_scaled.rows();
  const int zd = fm.model.latent_dim();

  MapResult res;
  res.z = initial_latents(fm, v_scaled, cfg.init);
  if (cfg.steps == 0 || n == 0) return res;

  MatrixXd best_z = res.z;
  VectorXd best_obj = VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  std::vector<char> alive(n, 1);

  nd::AdamState adam(n * zd);
  long nondecreasing = 0;
  double prev_mean = -std::numeric_limits<double>::infinity();

  for (int step = 0; step < cfg.steps; ++step) {
    GaussBatch gb = gauss_loglik_batch(fm.model.cov_spec, fm.model.theta, res.z, v_scaled);
    VectorXd obj = gb.row_loglik;
    for (long i = 0; i < n; ++i)
      obj[i] += -0.5 * (kLog2Pi * zd + res.z.row(i).squaredNorm());

    for (long i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      if (!std::isfinite(obj[i])) {
        alive[i] = 0;
        ++res.warning_rows;
        res.z.row(i) = best_z.row(i);  // freeze at the best finite iterate
        obj[i] = best_obj[i];
        continue;
      }
      if (obj[i] > best_obj[i]) {
        best_obj[i] = obj[i];
        best_z.row(i) = res.z.row(i);
      }
    }

    double mean_obj = 0.0;
    for (long i = 0; i < n; ++i) mean_obj += std::isfinite(obj[i]) ? obj[i] : 0.0;
    mean_obj /= static_cast<double>(n);
    if (step > 0 && mean_obj >= prev_mean) ++nondecreasing;
    prev_mean = mean_obj;

    nd::Gradients g;
    nd::backward(fm.model.cov_spec, fm.model.theta, gb.fwd, {gb.dmu, gb.dvar}, g, false, true);
    MatrixXd grad = g.input - res.z;  // + prior gradient
    for (long i = 0; i < n; ++i)
      if (!alive[i]) grad.row(i).setZero();
    if (!grad.allFinite()) {
      for (long i = 0; i < n; ++i)
        if (alive[i] && !grad.row(i).allFinite()) {
          alive[i] = 0;
          ++res.warning_rows;
          res.z.row(i) = best_z.row(i);
          grad.row(i).setZero();
        }
    }
    Eigen::Map<VectorXd> flat(res.z.data(), res.z.size());
    Eigen::Map<const VectorXd> gflat(grad.data(), grad.size());
    nd::adam_step(adam, flat, -gflat, cfg.learning_rate);  // ascent
  }
  for (long i = 0; i < n; ++i)
    if (!alive[i]) res.z.row(i) = best_z.row(i);
  res.ascent_fraction = cfg.steps > 1 ? static_cast<double>(nondecreasing) / (cfg.steps - 1) : 1.0;
  return res;
}

LatentState map_latent_single(const FittedModel& fm, const VectorXd& v_scaled, const MapConfig& cfg,
                              bool* warning) {
  MapResult r = map_latent(fm, v_scaled.transpose(), cfg);
  if (warning) *warning = r.warning_rows > 0;
  return LatentState{r.z.row(0).transpose(), fm.model.partition};
}

double structural_predict(const FittedModel& fm, double x, const VectorXd& v, const MapConfig& cfg) {
  const VectorXd vs = fm.scaler.apply_v_row(v);
  LatentState z = map_latent_single(fm, vs, cfg);
  auto heads = nd::forward_heads(fm.model.out_spec, fm.model.omega,
                                 fm.model.out_input(z.z0(), z.z1(), fm.scaler.apply_x(x)));
  return fm.scaler.invert_y(heads.at("mean")(0));
}

MseResult structural_mse(const FittedModel& fm, const bench::EvaluationGrid& grid,
                         const MapConfig& cfg, bool cache_distinct) {
  const long R = grid.rows();
  if (R == 0) throw std::invalid_argument("structural_mse: empty grid");
  const MatrixXd v_scaled = fm.scaler.apply_v(grid.v);

  MapResult solves;
  std::vector<long> row_to_solve(R);
  if (cache_distinct) {
    // dedupe rows by exact bytes; MAP depends only on v
    std::unordered_map<std::string, long> seen;
    MatrixXd distinct(R, v_scaled.cols());
    long d = 0;
    for (long r = 0; r < R; ++r) {
      VectorXd row = v_scaled.row(r).transpose();
      std::string key(reinterpret_cast<const char*>(row.data()), sizeof(double) * row.size());
      auto it = seen.find(key);
      if (it == seen.end()) {
        seen.emplace(std::move(key), d);
        distinct.row(d) = v_scaled.row(r);
        row_to_solve[r] = d;
        ++d;
      } else {
        row_to_solve[r] = it->second;
      }
    }
    solves = map_latent(fm, distinct.topRows(d), cfg);
  } else {
    solves = map_latent(fm, v_scaled, cfg);
    for (long r = 0; r < R; ++r) row_to_solve[r] = r;
  }

  const auto& part = fm.model.partition;
  const int d01 = part.d0 + part.d1;
  MatrixXd oin(R, d01 + 1);
  for (long r = 0; r < R; ++r) {
    oin.row(r).segment(0, d01) = solves.z.row(row_to_solve[r]).segment(0, d01);
    oin(r, d01) = fm.scaler.apply_x(grid.x[r]);
  }
  nd::Forward of = nd::forward(fm.model.out_spec, fm.model.omega, oin);

  double acc = 0.0;
  for (long r = 0; r < R; ++r) {
    const double pred = fm.scaler.invert_y(of.head_out[0](r, 0));
    const double d = pred - grid.g0[r];
    acc += d * d;
  }
  return {acc / static_cast<double>(R), solves.warning_rows};
}

}  // namespace bgmiv
