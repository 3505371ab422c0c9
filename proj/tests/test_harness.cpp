#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bgmiv/harness.hpp"
#include "bgmiv/io.hpp"

using namespace bgmiv;
using namespace bgmiv::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig tiny_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.variant = bench::Variant::Lowdim;
  cfg.cells = {{64, 0.5}};
  cfg.repeats = 2;
  cfg.seed = 5;
  cfg.methods = {"naive_regression"};
  cfg.train_cfg.epochs = 2;
  cfg.train_cfg.batch_size = 32;
  cfg.train_cfg.mc_train = 4;
  cfg.train_cfg.eval_every = 1;
  cfg.train_cfg.warm_start_iters = 50;
  cfg.map_cfg.steps = 20;
  cfg.out_dir = out;
  return cfg;
}

}  // namespace

TEST_CASE("seed derivation is injective and data seeds ignore the method") {
  ExperimentConfig cfg;
  cfg.seed = 17;
  std::set<std::uint64_t> seen;
  const std::vector<std::string> methods = {"bgm_iv", "bgm_iv_no_warmstart", "naive_regression",
                                            "two_sls"};
  int count = 0;
  for (const auto& m : methods)
    for (long n : {1000L, 5000L, 10000L})
      for (double rho : {0.1, 0.25, 0.5, 0.75, 0.9})
        for (int rep = 0; rep < 20; ++rep) {
          seen.insert(run_seed(cfg, m, {n, rho}, rep));
          ++count;
        }
  CHECK(static_cast<int>(seen.size()) == count);

  CHECK(data_seed(cfg, {5000, 0.5}, 3) == data_seed(cfg, {5000, 0.5}, 3));
  CHECK(run_seed(cfg, "bgm_iv", {5000, 0.5}, 3) != run_seed(cfg, "naive_regression", {5000, 0.5}, 3));
}

TEST_CASE("two_sls baseline and OLS slope on linear IV data") {
  bench::LinearIvConfig lc;
  lc.n = 100000;
  lc.beta = 2.0;
  lc.gamma = 1.0;
  lc.rho = 0.8;
  lc.seed = 41;
  auto ds = bench::gen_linear_iv(lc);
  auto fit = two_sls_baseline(bench::train_view(ds));
  CHECK(std::abs(fit.slope - 2.0) < 0.05);
  CHECK(std::abs(ols_slope(bench::train_view(ds)) - 2.4) < 0.05);

  // weak instrument: W unrelated to X
  bench::Dataset weak = ds;
  weak.x.setConstant(1.0);
  CHECK_THROWS_WITH_AS(two_sls_baseline(bench::train_view(weak)), doctest::Contains("weak"),
                       std::runtime_error);
}

TEST_CASE("summarize: mean and sample std over successes only") {
  std::vector<RunRecord> recs;
  for (int rep = 0; rep < 3; ++rep) {
    RunRecord r;
    r.method = "m";
    r.n = 10;
    r.rho = 0.5;
    r.repeat = rep;
    r.final_mse = 1.0;
    recs.push_back(r);
  }
  RunRecord failed;
  failed.method = "m";
  failed.n = 10;
  failed.rho = 0.5;
  failed.repeat = 3;
  failed.failed = true;
  recs.push_back(failed);

  auto s = summarize(recs);
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean_mse == doctest::Approx(1.0));
  CHECK(s[0].std_mse == doctest::Approx(0.0));
  CHECK(s[0].count == 3);
}

TEST_CASE("paired comparisons match repeats and skip failures") {
  std::vector<RunRecord> recs;
  auto add = [&](const std::string& m, int rep, double mse, bool failed = false) {
    RunRecord r;
    r.method = m;
    r.n = 10;
    r.rho = 0.5;
    r.repeat = rep;
    r.final_mse = mse;
    r.failed = failed;
    recs.push_back(r);
  };
  for (int rep = 0; rep < 6; ++rep) add("base", rep, 1.0 + rep);
  for (int rep = 0; rep < 5; ++rep) add("meth", rep, 0.5 + rep);
  add("meth", 5, 99.0, /*failed=*/true);  // excluded, leaving 5 pairs

  auto cmp = paired_comparisons(recs, "base", "meth");
  REQUIRE(cmp.size() == 1);
  CHECK(cmp[0].pairs == 5);
  CHECK(cmp[0].mean_diff == doctest::Approx(-0.5));
  CHECK(cmp[0].w_p == doctest::Approx(2.0 / 32.0));
  CHECK(cmp[0].w_p_holm == cmp[0].w_p);  // single-cell family
}

TEST_CASE("emit_outputs: headers-only files for empty records") {
  const fs::path dir = fs::temp_directory_path() / "bgmiv_empty_out";
  fs::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir.string());
  emit_outputs({}, {}, cfg, dir.string());
  CHECK(slurp(dir / "runs.csv") == "method,n,rho,repeat,seed,failed,final_mse,warnings\n");
  CHECK(slurp(dir / "summary.csv") == "method,n,rho,mean_mse_x1e4,std_mse_x1e4,count\n");
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: identical config overwrites byte for byte") {
  const fs::path dir = fs::temp_directory_path() / "bgmiv_run1";
  fs::remove_all(dir);

  ExperimentConfig cfg = tiny_config(dir.string());
  auto res1 = run_experiment(cfg);
  CHECK(res1.exit_code == 0);
  REQUIRE(res1.records.size() == 2);
  for (const auto& r : res1.records) CHECK(!r.failed);

  const std::string runs1 = slurp(dir / "runs.csv");
  const std::string summary1 = slurp(dir / "summary.csv");
  const std::string config1 = slurp(dir / "config.json");
  const std::string ckpt1 = slurp(dir / "models" / "naive_regression_n64_rho0.5_rep0.ckpt");

  auto res2 = run_experiment(cfg);
  (void)res2;
  CHECK(slurp(dir / "runs.csv") == runs1);
  CHECK(slurp(dir / "summary.csv") == summary1);
  CHECK(slurp(dir / "config.json") == config1);
  CHECK(slurp(dir / "models" / "naive_regression_n64_rho0.5_rep0.ckpt") == ckpt1);

  // summary.csv agrees with a recomputation from runs.csv
  auto s = summarize(res1.records);
  REQUIRE(s.size() == 1);
  double mean = 0.0;
  for (const auto& r : res1.records) mean += r.final_mse;
  mean /= 2.0;
  CHECK(s[0].mean_mse == doctest::Approx(mean));

  fs::remove_all(dir);
}

TEST_CASE("run_experiment: workers=2 reproduces the single-worker records") {
  const fs::path dir1 = fs::temp_directory_path() / "bgmiv_seq";
  const fs::path dir2 = fs::temp_directory_path() / "bgmiv_par";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  ExperimentConfig cfg = tiny_config(dir1.string());
  cfg.repeats = 3;
  auto seq = run_experiment(cfg);
  cfg.out_dir = dir2.string();
  cfg.workers = 2;
  auto par = run_experiment(cfg);
  CHECK(slurp(dir1 / "runs.csv") == slurp(dir2 / "runs.csv"));
  (void)seq;
  (void)par;
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("repeats=1 with one method yields one record per cell") {
  const fs::path dir = fs::temp_directory_path() / "bgmiv_cells";
  fs::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir.string());
  cfg.cells = {{48, 0.25}, {48, 0.75}};
  cfg.repeats = 1;
  cfg.train_cfg.epochs = 1;
  auto res = run_experiment(cfg);
  REQUIRE(res.records.size() == 2);
  CHECK(res.records[0].rho == 0.25);
  CHECK(res.records[1].rho == 0.75);
  CHECK(res.summaries.size() == 2);
  for (const auto& s : res.summaries) CHECK(s.count == 1);
  fs::remove_all(dir);
}

TEST_CASE("config parsing: defaults, overrides and errors") {
  auto cfg = parse_config_json(R"({
    "benchmark": "vector_proxy",
    "cells": [{"n": 100, "rho": 0.25}],
    "methods": ["bgm_iv"],
    "repeats": 1
  })");
  CHECK(cfg.variant == bench::Variant::VectorProxy);
  CHECK(cfg.train_cfg.batch_size == 32);  // vector default

  auto cfg2 = parse_config_json(R"({
    "benchmark": "demand_lowdim",
    "cells": [{"n": 100, "rho": 0.25}],
    "methods": ["bgm_iv"],
    "train": {"batch_size": 16, "epochs": 3}
  })");
  CHECK(cfg2.train_cfg.batch_size == 16);
  CHECK(cfg2.train_cfg.epochs == 3);
  CHECK(cfg2.train_cfg.mc_train == 1000);  // untouched default
  CHECK(cfg2.train_cfg.pzv_weight == 0.5);
  CHECK(cfg2.map_cfg.steps == 1000);

  CHECK_THROWS_AS(parse_config_json("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config_json(R"({"cells":[{"n":10,"rho":0.5}],"methods":["nope"]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_json(R"({"cells":[{"n":10,"rho":0.5}],"methods":["bgm_iv"],"typo":1})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_json(R"({"methods":["bgm_iv"]})"), ConfigError);  // no cells
}

TEST_CASE("checkpoint round trip is bit exact") {
  bench::DemandConfig dc;
  dc.n = 32;
  dc.seed = 3;
  auto ds = bench::gen_demand(dc);
  auto pr = train::make_problem(bench::train_view(ds), ds.scaler_kind, LatentPartition::demand(),
                                TrainObjective::Iv, bench::Variant::Lowdim);
  train::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  tc.mc_train = 4;
  tc.warm_start_iters = 20;
  tc.seed = 12;
  train::TrainState st = train::init_state(pr, tc);
  train::warm_start(st, pr, tc);
  RngStream mc(derive_seed(tc.seed, "mc", 0, 0));
  std::vector<long> batch;
  for (long i = 0; i < 16; ++i) batch.push_back(i);
  train::minibatch_step(st, pr, batch, tc, mc);

  io::TrainCheckpoint ck;
  ck.state = st;
  ck.scaler = pr.scaler;
  ck.objective = pr.objective;
  ck.treatment_kind = pr.treatment_kind;
  ck.variant = pr.variant;

  const fs::path path = fs::temp_directory_path() / "bgmiv_state.ckpt";
  io::save_train_checkpoint(path.string(), ck);
  auto back = io::load_train_checkpoint(path.string());
  CHECK(back.state.model.theta.values() == st.model.theta.values());
  CHECK(back.state.model.phi.values() == st.model.phi.values());
  CHECK(back.state.model.omega.values() == st.model.omega.values());
  CHECK(back.state.encoder.values() == st.encoder.values());
  CHECK(back.state.latents == st.latents);
  CHECK(back.state.latent_m == st.latent_m);
  CHECK(back.state.latent_v == st.latent_v);
  CHECK(back.state.adam_theta.m == st.adam_theta.m);
  CHECK(back.state.adam_omega.v == st.adam_omega.v);
  CHECK(back.state.adam_phi.step == st.adam_phi.step);
  CHECK(back.scaler.x_mean == pr.scaler.x_mean);

  // saving the reloaded state reproduces the file byte for byte
  const fs::path path2 = fs::temp_directory_path() / "bgmiv_state2.ckpt";
  io::save_train_checkpoint(path2.string(), back);
  CHECK(slurp(path) == slurp(path2));
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("dataset and grid CSV round trips") {
  bench::DemandConfig dc;
  dc.n = 40;
  dc.seed = 8;
  auto ds = bench::gen_demand(dc);
  const fs::path path = fs::temp_directory_path() / "bgmiv_data.csv";
  io::write_dataset_csv(path.string(), ds, "{\"variant\":\"lowdim\"}");
  auto back = io::read_dataset_csv(path.string());
  CHECK(back.x == ds.x);
  CHECK(back.y == ds.y);
  CHECK(back.w == ds.w);
  CHECK(back.v == ds.v);
  CHECK(fs::exists(path.string() + ".json"));
  fs::remove(path);
  fs::remove(path.string() + ".json");

  auto grid = bench::evaluation_grid(bench::Variant::Lowdim, 0);
  const fs::path gpath = fs::temp_directory_path() / "bgmiv_grid.csv";
  io::write_grid_csv(gpath.string(), grid);
  auto gback = io::read_grid_csv(gpath.string());
  CHECK(gback.x == grid.x);
  CHECK(gback.g0 == grid.g0);
  CHECK(gback.v == grid.v);
  fs::remove(gpath);
}
