// Acceptance suite: one pass/fail line per criterion. Exit code = number of
// failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "bgmiv/harness.hpp"
#include "bgmiv/io.hpp"
#include "bgmiv/model.hpp"
#include "bgmiv/stats.hpp"
#include "bgmiv/train.hpp"
#include "oracles.hpp"

using namespace bgmiv;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

VectorXd randn(int n, RngStream& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

BgmIvModel random_model(const LatentPartition& part, int cov_dim, TreatmentKind kind,
                        RngStream& rng, double scale) {
  BgmIvModel m = make_bgm_iv_model(part, cov_dim, kind);
  m.theta = nd::xavier_init(m.cov_spec, rng);
  m.phi = nd::xavier_init(m.treat_spec, rng);
  m.omega = nd::xavier_init(m.out_spec, rng);
  m.theta.values() *= scale;
  m.phi.values() *= scale;
  m.omega.values() *= scale;
  return m;
}

// Central-difference check over a coordinate subset (coords < 0 checks all).
// Coordinates where the second difference reveals a LeakyReLU kink inside the
// step neighbourhood are skipped: the objective is piecewise linear there and
// a symmetric difference does not estimate the one-sided derivative.
double check_subset_fd(const std::function<double(const VectorXd&)>& objective, const VectorXd& at,
                       const VectorXd& analytic, int coords, RngStream& rng, long* skipped) {
  double worst = 0.0;
  VectorXd x = at;
  const double step = 1e-5;
  const double f0 = objective(at);
  const int checks = coords < 0 ? static_cast<int>(at.size()) : coords;
  for (int k = 0; k < checks; ++k) {
    const Eigen::Index i = coords < 0 ? k : rng.below(at.size());
    const double orig = x[i];
    x[i] = orig + step;
    const double up = objective(x);
    x[i] = orig - step;
    const double dn = objective(x);
    x[i] = orig;
    // one-sided slope disagreement; a kink (or curvature) inside the step
    // ball biases the central difference by up to half this amount
    const double slope_gap = std::abs((up - f0) - (f0 - dn)) / step;
    if (slope_gap > 1e-4 * std::max(1.0, std::abs(analytic[i]))) {
      if (skipped) ++*skipped;
      continue;
    }
    const double fd = (up - dn) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1
Outcome criterion1() {
  Outcome out;
  double worst = 0.0;
  long checks = 0, skipped = 0;
  RngStream rng(derive_seed(2026, "c1"));
  struct Preset {
    LatentPartition part;
    int cov_dim;
  };
  const std::vector<Preset> presets = {{LatentPartition::demand(), 2},
                                       {LatentPartition::vector_proxy(), 785}};
  const int points = 100;
  for (const auto& preset : presets) {
    const auto& part = preset.part;
    for (int pt = 0; pt < points; ++pt) {
      auto m = random_model(part, preset.cov_dim, TreatmentKind::Continuous, rng, 0.9);
      LatentState st{randn(part.total(), rng), part};
      VectorXd v = randn(preset.cov_dim, rng);
      const double x = rng.normal(), y = rng.normal(), w = rng.normal();
      VectorXd eps = randn(24, rng);
      IvMcConfig mc{24, true};

      // L_V wrt theta
      {
        LogPvGrad g;
        log_p_v(m, st.z, v, &g);
        VectorXd grad = -g.theta;  // Eq.(6) with |B| = 1
        auto obj = [&](const VectorXd& th) {
          auto mm = m;
          mm.theta.values() = th;
          return -log_p_v(mm, st.z, v);
        };
        worst = std::max(worst, check_subset_fd(obj, m.theta.values(), grad, 6, rng, &skipped));
        checks += 6;
      }
      // L_X wrt phi
      {
        LogPxGrad g;
        log_p_x(m, w, st.z0(), st.z2(), x, &g);
        VectorXd grad = -g.phi;
        auto obj = [&](const VectorXd& ph) {
          auto mm = m;
          mm.phi.values() = ph;
          return -log_p_x(mm, w, st.z0(), st.z2(), x);
        };
        worst = std::max(worst, check_subset_fd(obj, m.phi.values(), grad, 6, rng, &skipped));
        checks += 6;
      }
      // L_Y-IV wrt omega, fixed draws
      {
        LogPivGrad g;
        log_p_iv(m, w, st.z0(), st.z1(), st.z2(), y, mc, nullptr, &g, &eps);
        VectorXd grad = -g.omega;
        auto obj = [&](const VectorXd& om) {
          auto mm = m;
          mm.omega.values() = om;
          return -log_p_iv(mm, w, st.z0(), st.z1(), st.z2(), y, mc, nullptr, nullptr, &eps);
        };
        worst = std::max(worst, check_subset_fd(obj, m.omega.values(), grad, 6, rng, &skipped));
        checks += 6;
      }
      // latent objective wrt the full z
      {
        VectorXd gz;
        log_quasi_posterior(m, st, x, y, v, w, mc, 0.5, nullptr, &gz, &eps);
        auto obj = [&](const VectorXd& zz) {
          LatentState s2{zz, part};
          return log_quasi_posterior(m, s2, x, y, v, w, mc, 0.5, nullptr, nullptr, &eps);
        };
        worst = std::max(worst, check_subset_fd(obj, st.z, gz, -1, rng, &skipped));
        checks += st.z.size();
      }
    }
  }
  out.pass = worst < 1e-4;
  out.detail << "max relative error " << worst << " (tolerance 1e-4, 100 points x 4 objectives x 2 "
             << "presets; " << skipped << "/" << checks
             << " coordinate checks skipped at activation kinks)";
  return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion2() {
  Outcome out;
  RngStream rng(derive_seed(2026, "c2"));
  const auto part = LatentPartition::demand();

  double worst_binary = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    auto m = random_model(part, 2, TreatmentKind::Binary, rng, 0.9);
    VectorXd z0 = randn(part.d0, rng), z1 = randn(part.d1, rng), z2 = randn(part.d2, rng);
    const double w = rng.normal(), y = rng.normal();
    IvMcConfig mc;
    const double got = log_p_iv(m, w, z0, z1, z2, y, mc, nullptr);

    auto th = nd::forward_heads(m.treat_spec, m.phi, m.treat_input(z0, z2, w));
    const double pi = nd::sigmoid(th.at("logit")(0));
    const double l0 = log_p_y(m, 0.0, z0, z1, y);
    const double l1 = log_p_y(m, 1.0, z0, z1, y);
    const double a = std::log1p(-pi) + l0, b = std::log(pi) + l1;
    const double c = std::max(a, b);
    const double oracle = c + std::log(std::exp(a - c) + std::exp(b - c));
    worst_binary = std::max(worst_binary, std::abs(got - oracle));
  }

  auto gh = oracles::gauss_hermite(2000);
  double worst_z = 0.0;
  int inside = 0;
  for (int rep = 0; rep < 50; ++rep) {
    auto m = random_model(part, 2, TreatmentKind::Continuous, rng, 0.8);
    VectorXd z0 = randn(part.d0, rng), z1 = randn(part.d1, rng), z2 = randn(part.d2, rng);
    const double w = rng.normal(), y = rng.normal();

    auto th = nd::forward_heads(m.treat_spec, m.phi, m.treat_input(z0, z2, w));
    const double mu = th.at("mean")(0), sd = std::sqrt(th.at("rawvar")(0));

    // quadrature of Eq. (3) on the density scale
    const int G = static_cast<int>(gh.nodes.size());
    MatrixXd oin(G, part.d0 + part.d1 + 1);
    oin.leftCols(part.d0).rowwise() = z0.transpose();
    oin.middleCols(part.d0, part.d1).rowwise() = z1.transpose();
    for (int i = 0; i < G; ++i) oin(i, part.d0 + part.d1) = mu + std::sqrt(2.0) * sd * gh.nodes[i];
    GaussBatch gb = gauss_loglik_batch(m.out_spec, m.omega, oin, VectorXd::Constant(G, y));
    std::vector<double> logf(gb.row_loglik.data(), gb.row_loglik.data() + G);
    const double quad =
        std::exp(oracles::gauss_hermite_log_integral(gh, logf) - 0.5 * std::log(M_PI));

    // MC estimate at M = 1e5 plus its standard error, common draws
    const int M = 100000;
    RngStream mcs(derive_seed(2026, "c2-mc", rep));
    VectorXd eps = randn(M, mcs);
    MatrixXd min(M, part.d0 + part.d1 + 1);
    min.leftCols(part.d0).rowwise() = z0.transpose();
    min.middleCols(part.d0, part.d1).rowwise() = z1.transpose();
    min.col(part.d0 + part.d1) = mu + sd * eps.array();
    GaussBatch mb = gauss_loglik_batch(m.out_spec, m.omega, min, VectorXd::Constant(M, y));
    const Eigen::ArrayXd p = mb.row_loglik.array().exp();
    const double mean = p.mean();
    const double se = std::sqrt((p - mean).square().sum() / (M - 1.0) / M);

    // the library estimator on the same draws
    IvMcConfig mc{M, true};
    const double lme = log_p_iv(m, w, z0, z1, z2, y, mc, nullptr, nullptr, &eps);
    const double z = std::abs(std::exp(lme) - quad) / std::max(se, 1e-300);
    worst_z = std::max(worst_z, z);
    if (z <= 3.0) ++inside;
  }
  out.pass = worst_binary < 1e-12 && inside == 50;
  out.detail << "binary max |diff| " << worst_binary << " (tol 1e-12); MC-vs-quadrature max " << worst_z
             << " standard errors, " << inside << "/50 within 3";
  return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion3() {
  Outcome out;
  const long n = 1000000;
  double worst_rho_err = 0.0, worst_instr = 0.0;
  for (double rho : {0.0, 0.5, 0.9}) {
    bench::DemandConfig cfg;
    cfg.n = n;
    cfg.rho = rho;
    cfg.seed = derive_seed(2026, "c3", rho);
    auto ds = bench::gen_demand(cfg);
    auto corr = [](const VectorXd& a, const VectorXd& b) {
      const double ma = a.mean(), mb = b.mean();
      return ((a.array() - ma) * (b.array() - mb)).sum() /
             std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
    };
    worst_rho_err = std::max(worst_rho_err, std::abs(corr(ds.diag.eps, ds.diag.u) - rho));
    worst_instr = std::max(worst_instr, std::abs(corr(ds.w, ds.diag.eps)));
  }
  bench::DemandConfig cfg;
  cfg.n = n;
  cfg.rho = 0.5;
  cfg.seed = derive_seed(2026, "c3-meanp");
  auto ds = bench::gen_demand(cfg);
  const double e_psi =
      oracles::simpson([](double t) { return bench::psi(t); }, 0.0, 10.0, 20000) / 10.0;
  const double mean_p_err = std::abs(ds.x.mean() - (25.0 + 3.0 * e_psi));

  auto grid = bench::evaluation_grid(bench::Variant::Lowdim, 0);
  bool grid_ok = grid.rows() == 2800;
  for (long r = 0; r < grid.rows() && grid_ok; ++r)
    grid_ok = grid.g0[r] == bench::structural_f0(grid.x[r], grid.v(r, 0), grid.v(r, 1));

  out.pass = worst_rho_err < 0.01 && worst_instr < 0.01 && mean_p_err < 0.1 && grid_ok;
  out.detail << "max |corr(eps,U)-rho| " << worst_rho_err << ", max |corr(C,eps)| " << worst_instr
             << ", |mean(P)-quadrature| " << mean_p_err << ", grid rows " << grid.rows()
             << (grid_ok ? " with exact truths" : " TRUTH MISMATCH");
  return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome criterion4() {
  Outcome out;
  bench::LinearIvConfig cfg;
  cfg.n = 100000;
  cfg.beta = 2.0;
  cfg.gamma = 1.0;
  cfg.rho = 0.8;
  cfg.seed = derive_seed(2026, "c4");
  auto ds = bench::gen_linear_iv(cfg);
  const auto fit = harness::two_sls_baseline(bench::train_view(ds));
  const double ols = harness::ols_slope(bench::train_view(ds));
  out.pass = std::abs(fit.slope - 2.0) < 0.05 && std::abs(ols - 2.4) < 0.05;
  out.detail << "2SLS slope " << fit.slope << " (target 2 +- 0.05), OLS slope " << ols
             << " (target 2.4 +- 0.05)";
  return out;
}

// -------------------------------------------------------------- criteria 5-7
harness::ExperimentConfig end_to_end_config(const std::string& out_dir) {
  harness::ExperimentConfig cfg;
  cfg.variant = bench::Variant::Lowdim;
  cfg.cells = {{5000, 0.5}};
  cfg.repeats = 5;
  cfg.seed = 20260;
  cfg.methods = {"bgm_iv", "naive_regression"};
  // full TrainConfig defaults; only the seed is set per run by the harness
  cfg.map_cfg = MapConfig{};
  cfg.out_dir = out_dir;
  cfg.workers = 2;
  cfg.write_checkpoints = false;
  return cfg;
}

struct EndToEnd {
  std::vector<harness::RunRecord> records;
  double wall_minutes = 0.0;
  double core_minutes = 0.0;
};

EndToEnd run_cfg(const harness::ExperimentConfig& cfg) {
  EndToEnd r;
  const double t0 = now_s();
  auto res = harness::run_experiment(cfg);
  r.wall_minutes = (now_s() - t0) / 60.0;
  for (const auto& rec : res.records) r.core_minutes += rec.wall_seconds / 60.0;
  r.records = res.records;
  return r;
}

std::vector<double> mses(const std::vector<harness::RunRecord>& records, const std::string& method,
                         long n) {
  std::vector<double> v;
  for (const auto& r : records)
    if (!r.failed && r.method == method && r.n == n) v.push_back(r.final_mse);
  return v;
}

Outcome criterion5(const EndToEnd& e2e) {
  Outcome out;
  const auto bgm = mses(e2e.records, "bgm_iv", 5000);
  const auto naive = mses(e2e.records, "naive_regression", 5000);
  if (bgm.size() != 5 || naive.size() != 5) {
    out.pass = false;
    out.detail << "expected 5+5 successful runs, got " << bgm.size() << "+" << naive.size();
    return out;
  }
  const double mb = median(bgm), mn = median(naive);
  const bool below_naive = mb < mn;
  const bool below_bound = mb <= 0.5e4;
  const bool in_budget = e2e.wall_minutes <= 30.0;
  out.pass = below_naive && below_bound && in_budget;
  out.detail << "median bgm_iv mse " << mb << " (x1e4 " << mb / 1e4 << "), median naive " << mn
             << " (x1e4 " << mn / 1e4 << "); bgm<naive " << (below_naive ? "yes" : "NO")
             << "; bgm<=0.5e4 " << (below_bound ? "yes" : "NO") << "; wall " << e2e.wall_minutes
             << " min (budget 30, 2 workers; summed per-run core time " << e2e.core_minutes
             << " min)";
  return out;
}

Outcome criterion6(const EndToEnd& egm, const EndToEnd& xavier) {
  Outcome out;
  const auto warm = mses(egm.records, "bgm_iv", 5000);
  const auto cold = mses(xavier.records, "bgm_iv_no_warmstart", 5000);
  if (warm.size() != 5 || cold.size() != 5) {
    out.pass = false;
    out.detail << "expected 5+5 successful runs, got " << warm.size() << "+" << cold.size();
    return out;
  }
  const double mw = median(warm), mc = median(cold);
  out.pass = mw < mc;
  out.detail << "median simplified_egm mse " << mw << " (x1e4 " << mw / 1e4
             << ") vs xavier_only " << mc << " (x1e4 " << mc / 1e4 << ")";
  return out;
}

Outcome criterion7(const EndToEnd& vec) {
  Outcome out;
  const auto bgm5k = mses(vec.records, "bgm_iv", 5000);
  const auto bgm1k = mses(vec.records, "bgm_iv", 1000);
  const auto naive5k = mses(vec.records, "naive_regression", 5000);
  if (bgm5k.size() != 3 || bgm1k.size() != 3 || naive5k.size() != 3) {
    out.pass = false;
    out.detail << "expected 3+3+3 successful runs, got " << bgm5k.size() << "+" << bgm1k.size()
               << "+" << naive5k.size();
    return out;
  }
  const double m5 = median(bgm5k), m1 = median(bgm1k), mn = median(naive5k);
  const bool bound = m5 < 1.0e4;
  const bool beats_naive = m5 < mn;
  const bool monotone = m5 < m1;
  out.pass = bound && beats_naive && monotone;
  out.detail << "median bgm mse n=5000 " << m5 << " (x1e4 " << m5 / 1e4 << "), n=1000 " << m1
             << " (x1e4 " << m1 / 1e4 << "), naive n=5000 " << mn << " (x1e4 " << mn / 1e4
             << "); <1e4 " << (bound ? "yes" : "NO") << "; <naive " << (beats_naive ? "yes" : "NO")
             << "; improving with n " << (monotone ? "yes" : "NO");
  return out;
}

// ---------------------------------------------------------------- criterion 8
Outcome criterion8() {
  Outcome out;
  RngStream rng(derive_seed(2026, "c8"));

  // Wilcoxon vs brute-force enumeration, 200 random vectors with ties
  double worst_w = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(12));
    std::vector<double> diffs(n);
    for (auto& d : diffs) {
      d = std::round(rng.normal() * 4.0) / 4.0;
      if (d == 0.0) d = rng.u01() < 0.5 ? 0.25 : -0.25;
    }
    const auto r = stats::wilcoxon_signed_rank(diffs);
    std::vector<double> mags;
    for (double d : diffs) mags.push_back(std::abs(d));
    std::vector<double> ranks(n);
    for (int i = 0; i < n; ++i) {
      int lo = 0, le = 0;
      for (int j = 0; j < n; ++j) {
        if (mags[j] < mags[i]) ++lo;
        if (mags[j] <= mags[i]) ++le;
      }
      ranks[i] = (lo + 1 + le) / 2.0;
    }
    worst_w = std::max(worst_w, std::abs(r.p - oracles::wilcoxon_enumeration_p(ranks, r.statistic)));
  }

  // Holm vs a direct step-down recomputation on 20 random p-vectors
  double worst_h = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(rng.below(12));
    std::vector<double> ps(m);
    for (auto& p : ps) p = rng.u01();
    const auto adj = stats::holm_adjust(ps);
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return ps[a] < ps[b]; });
    double run = 0.0;
    for (int i = 0; i < m; ++i) {
      run = std::max(run, std::min(1.0, (m - i) * ps[idx[i]]));
      worst_h = std::max(worst_h, std::abs(adj[idx[i]] - run));
    }
  }

  // paired t vs the quadrature oracle
  double worst_t = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 5 + static_cast<int>(rng.below(16));
    std::vector<double> diffs(n);
    for (auto& d : diffs) d = rng.normal() + 0.2;
    const auto r = stats::paired_t_test(diffs);
    worst_t = std::max(worst_t, std::abs(r.p - oracles::t_two_sided_p(r.t, n - 1)));
  }

  out.pass = worst_w < 1e-12 && worst_h < 1e-12 && worst_t < 1e-6;
  out.detail << "wilcoxon max |diff| " << worst_w << " (200 vectors, n<=12); holm max |diff| "
             << worst_h << "; paired-t max |diff| " << worst_t << " (tol 1e-6)";
  return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion9(const std::string& out_root) {
  Outcome out;
  harness::ExperimentConfig cfg;
  cfg.variant = bench::Variant::Lowdim;
  cfg.cells = {{256, 0.5}};
  cfg.repeats = 2;
  cfg.seed = 99;
  cfg.methods = {"bgm_iv", "naive_regression"};
  cfg.train_cfg.epochs = 10;
  cfg.train_cfg.mc_train = 100;
  cfg.train_cfg.eval_every = 5;
  cfg.train_cfg.warm_start_iters = 200;
  cfg.map_cfg.steps = 100;
  cfg.out_dir = out_root + "/c9";
  cfg.workers = 2;
  cfg.write_checkpoints = true;

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };

  fs::remove_all(cfg.out_dir);
  harness::run_experiment(cfg);
  const fs::path dir(cfg.out_dir);
  std::vector<fs::path> files = {dir / "runs.csv", dir / "summary.csv"};
  for (const auto& e : fs::directory_iterator(dir / "models")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> snap;
  for (const auto& f : files) snap.push_back(slurp(f));

  harness::run_experiment(cfg);
  bool identical = true;
  std::string first_diff;
  for (size_t i = 0; i < files.size(); ++i)
    if (slurp(files[i]) != snap[i]) {
      identical = false;
      first_diff = files[i].string();
      break;
    }
  out.pass = identical;
  out.detail << files.size() << " files compared (runs.csv, summary.csv, "
             << files.size() - 2 << " checkpoints): "
             << (identical ? "byte-identical" : "DIFF at " + first_diff);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_root = argc > 1 ? argv[1] : "acceptance_out";
  fs::create_directories(out_root);
  std::string only = argc > 2 ? argv[2] : "123456789";  // criterion ids to run

  struct Row {
    int id;
    std::string name;
    Outcome outcome;
    double seconds;
  };
  std::vector<Row> rows;
  auto record = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (only.find('0' + id) == std::string::npos) return;
    std::fprintf(stderr, "[run ] criterion %d: %s\n", id, name.c_str());
    const double t0 = now_s();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    rows.push_back({id, name, std::move(o), now_s() - t0});
    std::fprintf(stderr, "[%s] criterion %d (%.1f s): %s\n",
                 rows.back().outcome.pass ? "pass" : "FAIL", id, rows.back().seconds,
                 rows.back().outcome.detail.str().c_str());
  };

  record(1, "gradient correctness", criterion1);
  record(2, "IV-mixture oracle", criterion2);
  record(3, "generator oracles", criterion3);
  record(4, "2SLS/OLS sanity", criterion4);
  record(8, "statistics oracles", criterion8);
  record(9, "determinism", [&] { return criterion9(out_root); });

  // end-to-end workloads (criteria 5-7); criterion 6 reuses criterion 5's
  // simplified_egm runs under identical seeds
  EndToEnd c5, c6x, c7;
  record(5, "desk-scale end-to-end", [&] {
    auto cfg = end_to_end_config(out_root + "/c5");
    c5 = run_cfg(cfg);
    return criterion5(c5);
  });
  record(6, "ablation direction", [&] {
    auto cfg = end_to_end_config(out_root + "/c6");
    cfg.methods = {"bgm_iv_no_warmstart"};
    c6x = run_cfg(cfg);
    return criterion6(c5, c6x);
  });
  record(7, "vector-proxy qualitative claim", [&] {
    harness::ExperimentConfig cfg;
    cfg.variant = bench::Variant::VectorProxy;
    cfg.cells = {{1000, 0.5}, {5000, 0.5}};
    cfg.repeats = 3;
    cfg.seed = 20261;
    cfg.methods = {"bgm_iv", "naive_regression"};
    cfg.proxy_dim = 784;
    cfg.sigma_rep = 0.5;
    cfg.feature_seed = 7;
    cfg.train_cfg.batch_size = 32;
    cfg.out_dir = out_root + "/c7";
    cfg.workers = 2;
    cfg.write_checkpoints = false;
    c7 = run_cfg(cfg);
    // drop the naive n=1000 runs from the check; only n=5000 naive is needed
    return criterion7(c7);
  });

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  int failures = 0;
  std::printf("\n==== acceptance criteria ====\n");
  for (const auto& r : rows) {
    std::printf("[%s] criterion %d (%s, %.1f s): %s\n", r.outcome.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.seconds, r.outcome.detail.str().c_str());
    if (!r.outcome.pass) ++failures;
  }
  std::printf("==== %d/%zu criteria passed ====\n", static_cast<int>(rows.size()) - failures,
              rows.size());
  return failures;
}
