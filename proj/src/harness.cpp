#include "bgmiv/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <thread>

#include "bgmiv/io.hpp"

namespace bgmiv::harness {

using nlohmann::json;
namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (cells.empty()) throw ConfigError("config: at least one (n, rho) cell required");
  for (const auto& c : cells) {
    if (c.n < 1) throw ConfigError("config: cell n must be >= 1");
    if (c.rho < 0.0 || c.rho > 1.0) throw ConfigError("config: cell rho must be in [0,1]");
  }
  if (repeats < 1) throw ConfigError("config: repeats must be >= 1");
  if (methods.empty()) throw ConfigError("config: at least one method required");
  for (const auto& m : methods)
    if (m != "bgm_iv" && m != "bgm_iv_no_warmstart" && m != "naive_regression" && m != "two_sls")
      throw ConfigError("config: unknown method '" + m + "'");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  try {
    train_cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::uint64_t data_seed(const ExperimentConfig& cfg, Cell cell, int repeat) {
  return derive_seed(cfg.seed, "data", static_cast<std::uint64_t>(cell.n), cell.rho,
                     static_cast<std::uint64_t>(repeat));
}

std::uint64_t run_seed(const ExperimentConfig& cfg, const std::string& method, Cell cell,
                       int repeat) {
  return derive_seed(cfg.seed, std::string_view(method), static_cast<std::uint64_t>(cell.n),
                     cell.rho, static_cast<std::uint64_t>(repeat));
}

namespace {

double covariance(const VectorXd& a, const VectorXd& b) {
  return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / (a.size() - 1.0);
}

bench::Dataset make_dataset(const ExperimentConfig& cfg, Cell cell, std::uint64_t seed) {
  bench::DemandConfig dc;
  dc.n = cell.n;
  dc.rho = cell.rho;
  dc.seed = seed;
  dc.variant = cfg.variant;
  dc.proxy_dim = cfg.proxy_dim;
  dc.sigma_rep = cfg.sigma_rep;
  dc.feature_seed = cfg.feature_seed;
  dc.nuisance_dim = cfg.nuisance_dim;
  return cfg.variant == bench::Variant::Lowdim ? bench::gen_demand(dc) : bench::gen_vector_proxy(dc);
}

std::string join_warnings(const std::vector<std::string>& ws) {
  std::string out;
  for (const auto& w : ws) {
    if (!out.empty()) out += ';';
    std::string clean = w;
    for (char& c : clean)
      if (c == ',' || c == '\n') c = ';';
    out += clean;
  }
  return out;
}

}  // namespace

TwoSlsFit two_sls_baseline(const bench::DataView& data) {
  const double cwx = covariance(data.w, data.x);
  if (std::abs(cwx) < 1e-8)
    throw std::runtime_error("two_sls: weak instrument, |cov(W,X)| < 1e-8");
  TwoSlsFit f;
  f.slope = covariance(data.w, data.y) / cwx;
  f.intercept = data.y.mean() - f.slope * data.x.mean();
  return f;
}

double ols_slope(const bench::DataView& data) {
  return covariance(data.x, data.y) / covariance(data.x, data.x);
}

RunRecord run_single(const ExperimentConfig& cfg, const std::string& method, Cell cell, int repeat,
                     const bench::EvaluationGrid& grid) {
  RunRecord rec;
  rec.method = method;
  rec.n = cell.n;
  rec.rho = cell.rho;
  rec.repeat = repeat;
  rec.seed = run_seed(cfg, method, cell, repeat);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    bench::Dataset ds = make_dataset(cfg, cell, data_seed(cfg, cell, repeat));
    if (method == "two_sls") {
      TwoSlsFit f = two_sls_baseline(bench::train_view(ds));
      double acc = 0.0;
      for (long r = 0; r < grid.rows(); ++r) {
        const double d = f.intercept + f.slope * grid.x[r] - grid.g0[r];
        acc += d * d;
      }
      rec.final_mse = acc / static_cast<double>(grid.rows());
    } else {
      const LatentPartition part = cfg.variant == bench::Variant::Lowdim
                                       ? LatentPartition::demand()
                                       : LatentPartition::vector_proxy();
      const TrainObjective obj =
          method == "naive_regression" ? TrainObjective::Naive : TrainObjective::Iv;
      train::Problem pr =
          train::make_problem(bench::train_view(ds), ds.scaler_kind, part, obj, cfg.variant);
      train::TrainConfig tc = cfg.train_cfg;
      tc.seed = rec.seed;
      if (method == "bgm_iv_no_warmstart") tc.warm_start = train::WarmStartMode::XavierOnly;
      train::TrainResult res = train::train(pr, tc, &grid, cfg.map_cfg);
      rec.checkpoints = res.history.checkpoints;
      if (rec.checkpoints.empty() || !rec.checkpoints.back().has_mse)
        throw std::runtime_error("training produced no final evaluation");
      rec.final_mse = rec.checkpoints.back().mse;
      std::vector<std::string> warnings = res.fitted.warnings;
      long mw = 0;
      for (const auto& c : rec.checkpoints) mw += c.map_warnings;
      if (mw > 0) warnings.push_back("map_warnings=" + std::to_string(mw));
      rec.warnings = join_warnings(warnings);
      if (cfg.write_checkpoints && !cfg.out_dir.empty()) {
        fs::create_directories(fs::path(cfg.out_dir) / "models");
        std::ostringstream name;
        name << method << "_n" << cell.n << "_rho" << io::format_double(cell.rho) << "_rep"
             << repeat << ".ckpt";
        io::save_fitted_model((fs::path(cfg.out_dir) / "models" / name.str()).string(),
                              res.fitted);
      }
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.warnings = join_warnings({e.what()});
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::vector<CellSummary> summarize(const std::vector<RunRecord>& records) {
  std::vector<CellSummary> out;
  auto key_index = [&](const RunRecord& r) -> long {
    for (size_t i = 0; i < out.size(); ++i)
      if (out[i].method == r.method && out[i].n == r.n && out[i].rho == r.rho)
        return static_cast<long>(i);
    out.push_back({r.method, r.n, r.rho, 0.0, 0.0, 0});
    return static_cast<long>(out.size()) - 1;
  };
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    const long k = key_index(r);
    if (static_cast<long>(values.size()) <= k) values.resize(k + 1);
    if (!r.failed) values[static_cast<size_t>(k)].push_back(r.final_mse);
  }
  for (size_t k = 0; k < out.size(); ++k) {
    const auto& vs = values[k];
    out[k].count = static_cast<int>(vs.size());
    if (vs.empty()) continue;
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= vs.size();
    double ss = 0.0;
    for (double v : vs) ss += (v - mean) * (v - mean);
    out[k].mean_mse = mean;
    out[k].std_mse = vs.size() > 1 ? std::sqrt(ss / (vs.size() - 1.0)) : 0.0;
  }
  return out;
}

std::vector<PairedComparison> paired_comparisons(const std::vector<RunRecord>& records,
                                                 const std::string& baseline,
                                                 const std::string& method) {
  // collect cells in first-appearance order
  std::vector<Cell> cells;
  for (const auto& r : records) {
    bool seen = false;
    for (const auto& c : cells) seen = seen || (c.n == r.n && c.rho == r.rho);
    if (!seen) cells.push_back({r.n, r.rho});
  }

  std::vector<PairedComparison> out;
  for (const auto& cell : cells) {
    std::map<int, double> base_mse, meth_mse;
    for (const auto& r : records) {
      if (r.failed || r.n != cell.n || r.rho != cell.rho) continue;
      if (r.method == baseline) base_mse[r.repeat] = r.final_mse;
      if (r.method == method) meth_mse[r.repeat] = r.final_mse;
    }
    std::vector<double> diffs;
    for (const auto& [rep, b] : base_mse) {
      auto it = meth_mse.find(rep);
      if (it != meth_mse.end()) diffs.push_back(it->second - b);
    }
    PairedComparison pc;
    pc.baseline = baseline;
    pc.method = method;
    pc.n = cell.n;
    pc.rho = cell.rho;
    pc.pairs = static_cast<int>(diffs.size());
    if (pc.pairs >= 1) {
      double mean = 0.0;
      for (double d : diffs) mean += d;
      pc.mean_diff = mean / pc.pairs;
    }
    if (pc.pairs >= 2) {
      const stats::TTestResult t = stats::paired_t_test(diffs);
      pc.t_stat = t.t;
      pc.t_p = t.p;
      pc.t_degenerate = t.degenerate;
      bool all_zero = true;
      for (double d : diffs) all_zero = all_zero && d == 0.0;
      if (all_zero) {
        pc.w_stat = 0.0;
        pc.w_p = 1.0;
      } else {
        const stats::WilcoxonResult w = stats::wilcoxon_signed_rank(diffs);
        pc.w_stat = w.statistic;
        pc.w_p = w.p;
      }
    }
    out.push_back(pc);
  }
  // Holm family: all cells of this method pair
  std::vector<double> ps;
  for (const auto& pc : out) ps.push_back(pc.w_p);
  if (!ps.empty()) {
    const std::vector<double> adj = stats::holm_adjust(ps);
    for (size_t i = 0; i < out.size(); ++i) out[i].w_p_holm = adj[i];
  }
  return out;
}

namespace {

void write_runs_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "method,n,rho,repeat,seed,failed,final_mse,warnings\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.n << ',' << io::format_double(r.rho) << ',' << r.repeat << ','
        << r.seed << ',' << (r.failed ? 1 : 0) << ','
        << (r.failed ? "" : io::format_double(r.final_mse)) << ',' << r.warnings << "\n";
  }
}

void write_timings_csv(const std::string& path, const std::vector<RunRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "method,n,rho,repeat,wall_seconds\n";
  for (const auto& r : records)
    out << r.method << ',' << r.n << ',' << io::format_double(r.rho) << ',' << r.repeat << ','
        << io::format_double(r.wall_seconds) << "\n";
}

void write_summary_csv(const std::string& path, const std::vector<CellSummary>& summaries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "method,n,rho,mean_mse_x1e4,std_mse_x1e4,count\n";
  for (const auto& s : summaries) {
    out << s.method << ',' << s.n << ',' << io::format_double(s.rho) << ','
        << io::format_double(s.mean_mse / 1e4) << ',' << io::format_double(s.std_mse / 1e4) << ','
        << s.count << "\n";
  }
}

void write_comparisons_csv(const std::string& path, const std::vector<PairedComparison>& cmps) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "baseline,method,n,rho,pairs,mean_diff_x1e4,t_stat,t_p,t_degenerate,wilcoxon_stat,"
         "wilcoxon_p,wilcoxon_p_holm\n";
  for (const auto& c : cmps) {
    out << c.baseline << ',' << c.method << ',' << c.n << ',' << io::format_double(c.rho) << ','
        << c.pairs << ',' << io::format_double(c.mean_diff / 1e4) << ','
        << io::format_double(c.t_stat) << ',' << io::format_double(c.t_p) << ','
        << (c.t_degenerate ? 1 : 0) << ',' << io::format_double(c.w_stat) << ','
        << io::format_double(c.w_p) << ',' << io::format_double(c.w_p_holm) << "\n";
  }
}

void write_traces(const std::vector<RunRecord>& records, const std::string& dir) {
  // one file per (method, cell) with all repeats' checkpoint curves
  std::map<std::string, std::ofstream> files;
  for (const auto& r : records) {
    if (r.failed || r.checkpoints.empty()) continue;
    std::ostringstream name;
    name << "trace_" << r.method << "_n" << r.n << "_rho" << io::format_double(r.rho) << ".csv";
    const std::string path = (fs::path(dir) / name.str()).string();
    auto it = files.find(path);
    if (it == files.end()) {
      it = files.emplace(path, std::ofstream(path)).first;
      if (!it->second) throw std::runtime_error("cannot open for write: " + path);
      it->second << "repeat,epoch,loss_v,loss_x,loss_y,latent_obj,mse,map_warnings\n";
    }
    for (const auto& c : r.checkpoints) {
      it->second << r.repeat << ',' << c.epoch << ',' << io::format_double(c.loss_v) << ','
                 << io::format_double(c.loss_x) << ',' << io::format_double(c.loss_y) << ','
                 << io::format_double(c.latent_obj) << ','
                 << (c.has_mse ? io::format_double(c.mse) : "") << ',' << c.map_warnings << "\n";
    }
  }
}

}  // namespace

void emit_outputs(const std::vector<RunRecord>& records, const std::vector<CellSummary>& summaries,
                  const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  write_runs_csv((fs::path(dir) / "runs.csv").string(), records);
  write_timings_csv((fs::path(dir) / "timings.csv").string(), records);
  write_summary_csv((fs::path(dir) / "summary.csv").string(), summaries);

  std::vector<PairedComparison> cmps;
  for (size_t i = 0; i < cfg.methods.size(); ++i)
    for (size_t j = i + 1; j < cfg.methods.size(); ++j) {
      auto part = paired_comparisons(records, cfg.methods[i], cfg.methods[j]);
      cmps.insert(cmps.end(), part.begin(), part.end());
    }
  write_comparisons_csv((fs::path(dir) / "comparisons.csv").string(), cmps);

  std::ofstream cfg_out((fs::path(dir) / "config.json").string());
  if (!cfg_out) throw std::runtime_error("cannot write config echo");
  cfg_out << config_to_json(cfg) << "\n";

  write_traces(records, dir);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bench::EvaluationGrid grid = bench::evaluation_grid(
      cfg.variant, cfg.feature_seed, cfg.proxy_dim, cfg.sigma_rep, cfg.nuisance_dim);

  struct Task {
    std::string method;
    Cell cell;
    int repeat;
  };
  std::vector<Task> tasks;
  for (const auto& method : cfg.methods)
    for (const auto& cell : cfg.cells)
      for (int rep = 0; rep < cfg.repeats; ++rep) tasks.push_back({method, cell, rep});

  std::vector<RunRecord> records(tasks.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      records[i] = run_single(cfg, tasks[i].method, tasks[i].cell, tasks[i].repeat, grid);
    }
  };
  if (cfg.workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult res;
  res.records = std::move(records);
  res.summaries = summarize(res.records);
  for (const auto& r : res.records)
    if (r.failed) res.exit_code = 1;
  if (!cfg.out_dir.empty()) emit_outputs(res.records, res.summaries, cfg, cfg.out_dir);
  return res;
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  static const std::vector<std::string> allowed = {
      "benchmark", "cells",        "repeats",   "seed",         "methods",
      "train",     "map",          "proxy_dim", "sigma_rep",    "feature_seed",
      "nuisance_dim", "out_dir",   "workers",   "write_checkpoints"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config: unknown key '" + it.key() + "'");
  }

  ExperimentConfig cfg;
  try {
    const std::string bench_name = j.value("benchmark", std::string("demand_lowdim"));
    if (bench_name == "demand_lowdim")
      cfg.variant = bench::Variant::Lowdim;
    else if (bench_name == "vector_proxy")
      cfg.variant = bench::Variant::VectorProxy;
    else
      throw ConfigError("config: unknown benchmark '" + bench_name + "'");

    if (j.contains("cells"))
      for (const auto& cj : j.at("cells"))
        cfg.cells.push_back({cj.at("n").get<long>(), cj.at("rho").get<double>()});
    cfg.repeats = j.value("repeats", 20);
    cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
    if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
    cfg.proxy_dim = j.value("proxy_dim", 784);
    cfg.sigma_rep = j.value("sigma_rep", 0.5);
    cfg.feature_seed = j.value("feature_seed", static_cast<std::uint64_t>(0));
    cfg.nuisance_dim = j.value("nuisance_dim", 0);
    cfg.out_dir = j.value("out_dir", std::string());
    cfg.workers = j.value("workers", 1);
    cfg.write_checkpoints = j.value("write_checkpoints", true);

    // benchmark-specific default batch size, overridable in "train"
    cfg.train_cfg.batch_size = cfg.variant == bench::Variant::Lowdim ? 64 : 32;
    if (j.contains("train")) {
      const json& t = j.at("train");
      static const std::vector<std::string> tkeys = {
          "epochs",        "batch_size", "lr_theta",       "lr_phi",
          "lr_omega",      "lr_latent",  "warmup_epochs",  "mc_train",
          "eval_every",    "pzv_weight", "warm_start",     "warm_start_iters",
          "warm_start_lr", "reparameterize_for_latent"};
      for (auto it = t.begin(); it != t.end(); ++it) {
        bool ok = false;
        for (const auto& k : tkeys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError("config: unknown train key '" + it.key() + "'");
      }
      auto& tc = cfg.train_cfg;
      tc.epochs = t.value("epochs", tc.epochs);
      tc.batch_size = t.value("batch_size", tc.batch_size);
      tc.lr_theta = t.value("lr_theta", tc.lr_theta);
      tc.lr_phi = t.value("lr_phi", tc.lr_phi);
      tc.lr_omega = t.value("lr_omega", tc.lr_omega);
      tc.lr_latent = t.value("lr_latent", tc.lr_latent);
      tc.warmup_epochs = t.value("warmup_epochs", tc.warmup_epochs);
      tc.mc_train = t.value("mc_train", tc.mc_train);
      tc.eval_every = t.value("eval_every", tc.eval_every);
      tc.pzv_weight = t.value("pzv_weight", tc.pzv_weight);
      tc.warm_start_iters = t.value("warm_start_iters", tc.warm_start_iters);
      tc.warm_start_lr = t.value("warm_start_lr", tc.warm_start_lr);
      tc.reparameterize_for_latent =
          t.value("reparameterize_for_latent", tc.reparameterize_for_latent);
      if (t.contains("warm_start")) {
        const std::string ws = t.at("warm_start").get<std::string>();
        if (ws == "simplified_egm")
          tc.warm_start = train::WarmStartMode::SimplifiedEgm;
        else if (ws == "xavier_only")
          tc.warm_start = train::WarmStartMode::XavierOnly;
        else
          throw ConfigError("config: unknown warm_start '" + ws + "'");
      }
    }
    if (j.contains("map")) {
      const json& mj = j.at("map");
      cfg.map_cfg.steps = mj.value("steps", cfg.map_cfg.steps);
      cfg.map_cfg.learning_rate = mj.value("learning_rate", cfg.map_cfg.learning_rate);
      if (mj.contains("init")) {
        const std::string init = mj.at("init").get<std::string>();
        if (init == "encoder")
          cfg.map_cfg.init = MapConfig::Init::Encoder;
        else if (init == "zero")
          cfg.map_cfg.init = MapConfig::Init::Zero;
        else
          throw ConfigError("config: unknown map init '" + init + "'");
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<RunRecord> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("method,n,rho,repeat,seed,failed,final_mse", 0) != 0)
    throw std::runtime_error("runs.csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> tok;
    size_t pos = 0;
    for (int k = 0; k < 7; ++k) {
      const size_t comma = line.find(',', pos);
      tok.push_back(comma == std::string::npos ? line.substr(pos) : line.substr(pos, comma - pos));
      pos = comma == std::string::npos ? line.size() + 1 : comma + 1;
    }
    RunRecord r;
    r.method = tok[0];
    r.n = std::stol(tok[1]);
    r.rho = std::stod(tok[2]);
    r.repeat = std::stoi(tok[3]);
    r.seed = std::stoull(tok[4]);
    r.failed = tok[5] == "1";
    r.final_mse = (r.failed || tok[6].empty()) ? 0.0 : std::stod(tok[6]);
    if (pos <= line.size()) r.warnings = line.substr(pos);
    out.push_back(std::move(r));
  }
  return out;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["benchmark"] = cfg.variant == bench::Variant::Lowdim ? "demand_lowdim" : "vector_proxy";
  json cells = json::array();
  for (const auto& c : cfg.cells) cells.push_back({{"n", c.n}, {"rho", c.rho}});
  j["cells"] = cells;
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["methods"] = cfg.methods;
  j["proxy_dim"] = cfg.proxy_dim;
  j["sigma_rep"] = cfg.sigma_rep;
  j["feature_seed"] = cfg.feature_seed;
  j["nuisance_dim"] = cfg.nuisance_dim;
  j["out_dir"] = cfg.out_dir;
  j["workers"] = cfg.workers;
  j["write_checkpoints"] = cfg.write_checkpoints;
  json t;
  t["epochs"] = cfg.train_cfg.epochs;
  t["batch_size"] = cfg.train_cfg.batch_size;
  t["lr_theta"] = cfg.train_cfg.lr_theta;
  t["lr_phi"] = cfg.train_cfg.lr_phi;
  t["lr_omega"] = cfg.train_cfg.lr_omega;
  t["lr_latent"] = cfg.train_cfg.lr_latent;
  t["warmup_epochs"] = cfg.train_cfg.warmup_epochs;
  t["mc_train"] = cfg.train_cfg.mc_train;
  t["eval_every"] = cfg.train_cfg.eval_every;
  t["pzv_weight"] = cfg.train_cfg.pzv_weight;
  t["warm_start"] = cfg.train_cfg.warm_start == train::WarmStartMode::SimplifiedEgm
                        ? "simplified_egm"
                        : "xavier_only";
  t["warm_start_iters"] = cfg.train_cfg.warm_start_iters;
  t["warm_start_lr"] = cfg.train_cfg.warm_start_lr;
  t["reparameterize_for_latent"] = cfg.train_cfg.reparameterize_for_latent;
  j["train"] = t;
  json mj;
  mj["steps"] = cfg.map_cfg.steps;
  mj["learning_rate"] = cfg.map_cfg.learning_rate;
  mj["init"] = cfg.map_cfg.init == MapConfig::Init::Encoder ? "encoder" : "zero";
  j["map"] = mj;
  return j.dump(2);
}

}  // namespace bgmiv::harness
