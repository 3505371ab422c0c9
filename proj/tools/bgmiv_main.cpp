#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "bgmiv/harness.hpp"
#include "bgmiv/io.hpp"

using namespace bgmiv;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw harness::ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

harness::Cell parse_cell(const std::string& spec) {
  harness::Cell cell;
  bool have_n = false, have_rho = false;
  size_t pos = 0;
  while (pos < spec.size()) {
    const size_t comma = spec.find(',', pos);
    const std::string part =
        comma == std::string::npos ? spec.substr(pos) : spec.substr(pos, comma - pos);
    const size_t eq = part.find('=');
    if (eq == std::string::npos) throw harness::ConfigError("bad --cell entry: " + spec);
    const std::string key = part.substr(0, eq);
    const std::string val = part.substr(eq + 1);
    if (key == "n") {
      cell.n = std::stol(val);
      have_n = true;
    } else if (key == "rho") {
      cell.rho = std::stod(val);
      have_rho = true;
    } else {
      throw harness::ConfigError("bad --cell key '" + key + "' (use n=..,rho=..)");
    }
    pos = comma == std::string::npos ? spec.size() : comma + 1;
  }
  if (!have_n || !have_rho) throw harness::ConfigError("--cell needs both n= and rho=");
  return cell;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& cell_specs,
            const std::vector<std::string>& methods, int repeats, long long seed,
            const std::string& out_dir, int workers) {
  harness::ExperimentConfig cfg = harness::parse_config_json(slurp(config_path));
  if (!cell_specs.empty()) {
    cfg.cells.clear();
    for (const auto& s : cell_specs) cfg.cells.push_back(parse_cell(s));
  }
  if (!methods.empty()) cfg.methods = methods;
  if (repeats > 0) cfg.repeats = repeats;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (workers > 0) cfg.workers = workers;
  cfg.validate();
  if (cfg.out_dir.empty()) throw harness::ConfigError("config: out_dir required (or pass --out)");

  harness::ExperimentResult res = harness::run_experiment(cfg);
  long failed = 0;
  for (const auto& r : res.records) failed += r.failed ? 1 : 0;
  std::cout << "runs: " << res.records.size() << "  failed: " << failed << "\n";
  for (const auto& s : res.summaries)
    std::cout << s.method << " n=" << s.n << " rho=" << io::format_double(s.rho)
              << "  mse(x1e4) = " << io::format_double(s.mean_mse / 1e4) << " +- "
              << io::format_double(s.std_mse / 1e4) << "  (" << s.count << " runs)\n";
  std::cout << "outputs written to " << cfg.out_dir << "\n";
  return res.exit_code;
}

int cmd_gen(const std::string& variant, long n, double rho, long long seed, const std::string& out,
            int proxy_dim, double sigma_rep, long long feature_seed, int nuisance, double beta,
            double gamma, const std::string& grid_out) {
  nlohmann::json side;
  bench::Dataset ds;
  if (variant == "lowdim" || variant == "vector_proxy") {
    bench::DemandConfig dc;
    dc.n = n;
    dc.rho = rho;
    dc.seed = static_cast<std::uint64_t>(seed);
    dc.variant = variant == "lowdim" ? bench::Variant::Lowdim : bench::Variant::VectorProxy;
    dc.proxy_dim = proxy_dim;
    dc.sigma_rep = sigma_rep;
    dc.feature_seed = static_cast<std::uint64_t>(feature_seed);
    dc.nuisance_dim = nuisance;
    ds = dc.variant == bench::Variant::Lowdim ? bench::gen_demand(dc) : bench::gen_vector_proxy(dc);
    side["variant"] = variant;
    side["n"] = n;
    side["rho"] = rho;
    side["seed"] = seed;
    side["proxy_dim"] = proxy_dim;
    side["sigma_rep"] = sigma_rep;
    side["feature_seed"] = feature_seed;
    side["nuisance_dim"] = nuisance;
    if (!grid_out.empty()) {
      auto grid =
          bench::evaluation_grid(dc.variant, dc.feature_seed, proxy_dim, sigma_rep, nuisance);
      io::write_grid_csv(grid_out, grid);
    }
  } else if (variant == "linear") {
    bench::LinearIvConfig lc;
    lc.n = n;
    lc.rho = rho;
    lc.seed = static_cast<std::uint64_t>(seed);
    lc.beta = beta;
    lc.gamma = gamma;
    ds = bench::gen_linear_iv(lc);
    side["variant"] = variant;
    side["n"] = n;
    side["rho"] = rho;
    side["seed"] = seed;
    side["beta"] = beta;
    side["gamma"] = gamma;
  } else {
    throw harness::ConfigError("unknown --variant '" + variant + "'");
  }
  side["scaler"] = ds.scaler_kind == ScalerKind::StandardizeFit
                       ? "standardize_fit"
                       : (ds.scaler_kind == ScalerKind::FixedDfiv ? "fixed_dfiv" : "identity");
  side["diagnostics_checksum"] = io::diagnostics_checksum(ds);
  io::write_dataset_csv(out, ds, side.dump(2));
  std::cout << "wrote " << out << " (" << ds.n() << " rows, v_dim " << ds.v_dim() << ")\n";
  return 0;
}

int cmd_score(const std::string& model_path, const std::string& grid_path, int map_steps,
              double map_lr, const std::string& map_init) {
  FittedModel fm = io::load_fitted_model(model_path);
  bench::EvaluationGrid grid = io::read_grid_csv(grid_path);
  MapConfig mc;
  if (map_steps >= 0) mc.steps = map_steps;
  if (map_lr > 0) mc.learning_rate = map_lr;
  if (map_init == "zero") mc.init = MapConfig::Init::Zero;
  MseResult r = structural_mse(fm, grid, mc);
  std::cout << "structural_mse " << io::format_double(r.mse) << "\n";
  std::cout << "structural_mse_x1e4 " << io::format_double(r.mse / 1e4) << "\n";
  if (r.map_warnings > 0) std::cout << "map_warnings " << r.map_warnings << "\n";
  return 0;
}

int cmd_stats(const std::string& runs_path, const std::string& baseline, const std::string& method,
              const std::string& out_path) {
  auto records = harness::read_runs_csv(runs_path);
  auto cmps = harness::paired_comparisons(records, baseline, method);
  std::ostringstream os;
  os << "baseline,method,n,rho,pairs,mean_diff_x1e4,t_stat,t_p,t_degenerate,wilcoxon_stat,"
        "wilcoxon_p,wilcoxon_p_holm\n";
  for (const auto& c : cmps) {
    os << c.baseline << ',' << c.method << ',' << c.n << ',' << io::format_double(c.rho) << ','
       << c.pairs << ',' << io::format_double(c.mean_diff / 1e4) << ','
       << io::format_double(c.t_stat) << ',' << io::format_double(c.t_p) << ','
       << (c.t_degenerate ? 1 : 0) << ',' << io::format_double(c.w_stat) << ','
       << io::format_double(c.w_p) << ',' << io::format_double(c.w_p_holm) << "\n";
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for write: " + out_path);
    out << os.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BGM-IV experiment harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a configured experiment");
  std::string run_config, run_out;
  std::vector<std::string> run_cells, run_methods;
  int run_repeats = 0, run_workers = 0;
  long long run_seed = -1;
  run->add_option("--config", run_config, "experiment config (JSON)")->required();
  run->add_option("--cell", run_cells, "override cells, e.g. n=5000,rho=0.5 (repeatable)");
  run->add_option("--method", run_methods, "override method list (repeatable)");
  run->add_option("--repeats", run_repeats, "override repeat count");
  run->add_option("--seed", run_seed, "override base seed");
  run->add_option("--out", run_out, "override output directory");
  run->add_option("--workers", run_workers, "override worker count");

  auto* gen = app.add_subcommand("gen", "generate a benchmark dataset");
  std::string gen_variant = "lowdim", gen_out, gen_grid_out;
  long gen_n = 1000;
  double gen_rho = 0.5, gen_sigma_rep = 0.5, gen_beta = 2.0, gen_gamma = 1.0;
  long long gen_seed = 0, gen_feature_seed = 0;
  int gen_proxy_dim = 784, gen_nuisance = 0;
  gen->add_option("--variant", gen_variant, "lowdim | vector_proxy | linear");
  gen->add_option("--n", gen_n, "sample size")->required();
  gen->add_option("--rho", gen_rho, "confounding level");
  gen->add_option("--seed", gen_seed, "data seed");
  gen->add_option("--out", gen_out, "output CSV path")->required();
  gen->add_option("--proxy-dim", gen_proxy_dim, "proxy dimension (vector_proxy)");
  gen->add_option("--sigma-rep", gen_sigma_rep, "proxy noise scale (vector_proxy)");
  gen->add_option("--feature-seed", gen_feature_seed, "prototype seed (vector_proxy)");
  gen->add_option("--nuisance", gen_nuisance, "appended nuisance covariates");
  gen->add_option("--beta", gen_beta, "structural slope (linear)");
  gen->add_option("--gamma", gen_gamma, "instrument strength (linear)");
  gen->add_option("--grid-out", gen_grid_out, "also write the matching evaluation grid");

  auto* score = app.add_subcommand("score", "structural MSE of a model checkpoint on a grid");
  std::string score_model, score_grid, score_init = "encoder";
  int score_steps = -1;
  double score_lr = 0.0;
  score->add_option("--model", score_model, "fitted-model checkpoint")->required();
  score->add_option("--grid", score_grid, "grid CSV")->required();
  score->add_option("--map-steps", score_steps, "MAP step count");
  score->add_option("--map-lr", score_lr, "MAP learning rate");
  score->add_option("--map-init", score_init, "encoder | zero");

  auto* stats = app.add_subcommand("stats", "paired tests between two methods in a runs.csv");
  std::string stats_runs, stats_baseline, stats_method, stats_out;
  stats->add_option("--runs", stats_runs, "runs.csv path")->required();
  stats->add_option("--baseline", stats_baseline, "baseline method name")->required();
  stats->add_option("--method", stats_method, "method to compare")->required();
  stats->add_option("--out", stats_out, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed())
      return cmd_run(run_config, run_cells, run_methods, run_repeats, run_seed, run_out,
                     run_workers);
    if (gen->parsed())
      return cmd_gen(gen_variant, gen_n, gen_rho, gen_seed, gen_out, gen_proxy_dim, gen_sigma_rep,
                     gen_feature_seed, gen_nuisance, gen_beta, gen_gamma, gen_grid_out);
    if (score->parsed())
      return cmd_score(score_model, score_grid, score_steps, score_lr, score_init);
    if (stats->parsed()) return cmd_stats(stats_runs, stats_baseline, stats_method, stats_out);
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
