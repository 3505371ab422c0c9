#include "bgmiv/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace bgmiv::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

namespace {

constexpr char kMagic[8] = {'B', 'G', 'M', 'I', 'V', 'C', 'K', '1'};

json spec_to_json(const nd::NetworkSpec& s) {
  json j;
  j["name"] = s.name;
  j["input_dim"] = s.input_dim;
  j["hidden"] = s.hidden_widths;
  j["activation"] = s.activation == nd::Activation::LeakyRelu
                        ? "leaky_relu"
                        : (s.activation == nd::Activation::Relu ? "relu" : "linear");
  j["leaky_slope"] = s.leaky_slope;
  j["l2"] = s.l2_coefficient;
  json heads = json::array();
  for (const auto& h : s.heads) {
    json hj;
    hj["name"] = h.name;
    hj["dim"] = h.dim;
    hj["transform"] = h.transform == nd::HeadTransform::Identity
                          ? "identity"
                          : (h.transform == nd::HeadTransform::Softplus ? "softplus" : "sigmoid");
    hj["floor"] = h.floor;
    heads.push_back(hj);
  }
  j["heads"] = heads;
  return j;
}

nd::NetworkSpec spec_from_json(const json& j) {
  nd::NetworkSpec s;
  s.name = j.at("name").get<std::string>();
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden_widths = j.at("hidden").get<std::vector<int>>();
  const std::string act = j.at("activation").get<std::string>();
  s.activation = act == "leaky_relu" ? nd::Activation::LeakyRelu
                                     : (act == "relu" ? nd::Activation::Relu : nd::Activation::Linear);
  s.leaky_slope = j.at("leaky_slope").get<double>();
  s.l2_coefficient = j.at("l2").get<double>();
  for (const auto& hj : j.at("heads")) {
    nd::HeadSpec h;
    h.name = hj.at("name").get<std::string>();
    h.dim = hj.at("dim").get<int>();
    const std::string t = hj.at("transform").get<std::string>();
    h.transform = t == "identity" ? nd::HeadTransform::Identity
                                  : (t == "softplus" ? nd::HeadTransform::Softplus
                                                     : nd::HeadTransform::Sigmoid);
    h.floor = hj.at("floor").get<double>();
    s.heads.push_back(h);
  }
  return s;
}

json scaler_to_json(const ScalerSpec& s) {
  json j;
  j["kind"] = s.kind == ScalerKind::StandardizeFit
                  ? "standardize_fit"
                  : (s.kind == ScalerKind::FixedDfiv ? "fixed_dfiv" : "identity");
  j["fitted"] = s.fitted;
  j["x_mean"] = s.x_mean;
  j["x_std"] = s.x_std;
  j["y_mean"] = s.y_mean;
  j["y_std"] = s.y_std;
  j["w_mean"] = s.w_mean;
  j["w_std"] = s.w_std;
  j["v_mean"] = std::vector<double>(s.v_mean.data(), s.v_mean.data() + s.v_mean.size());
  j["v_std"] = std::vector<double>(s.v_std.data(), s.v_std.data() + s.v_std.size());
  return j;
}

ScalerSpec scaler_from_json(const json& j) {
  ScalerSpec s;
  const std::string k = j.at("kind").get<std::string>();
  s.kind = k == "standardize_fit" ? ScalerKind::StandardizeFit
                                  : (k == "fixed_dfiv" ? ScalerKind::FixedDfiv : ScalerKind::Identity);
  s.fitted = j.at("fitted").get<bool>();
  s.x_mean = j.at("x_mean").get<double>();
  s.x_std = j.at("x_std").get<double>();
  s.y_mean = j.at("y_mean").get<double>();
  s.y_std = j.at("y_std").get<double>();
  s.w_mean = j.at("w_mean").get<double>();
  s.w_std = j.at("w_std").get<double>();
  auto vm = j.at("v_mean").get<std::vector<double>>();
  auto vs = j.at("v_std").get<std::vector<double>>();
  s.v_mean = Eigen::Map<const VectorXd>(vm.data(), vm.size());
  s.v_std = Eigen::Map<const VectorXd>(vs.data(), vs.size());
  return s;
}

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("cannot open for write: " + path);
  }
  void raw(const void* p, size_t n) { out.write(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void doubles(const double* p, size_t n) {
    u64(n);
    raw(p, n * sizeof(double));
  }
  void vec(const VectorXd& v) { doubles(v.data(), v.size()); }
  void mat(const MatrixXd& m) { doubles(m.data(), m.size()); }  // column-major payload
};

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {
    if (!in) throw std::runtime_error("cannot open for read: " + path);
  }
  void raw(void* p, size_t n) {
    in.read(static_cast<char*>(p), n);
    if (!in) throw std::runtime_error("checkpoint truncated");
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  VectorXd vec() {
    const std::uint64_t n = u64();
    VectorXd v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  MatrixXd mat(long rows, long cols) {
    const std::uint64_t n = u64();
    if (n != static_cast<std::uint64_t>(rows) * cols)
      throw std::runtime_error("checkpoint: matrix size mismatch");
    MatrixXd m(rows, cols);
    raw(m.data(), n * sizeof(double));
    return m;
  }
};

void write_header(Writer& w, const json& manifest) {
  w.raw(kMagic, 8);
  const std::string m = manifest.dump();
  w.u64(m.size());
  w.raw(m.data(), m.size());
}

json read_header(Reader& r) {
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a bgmiv checkpoint");
  const std::uint64_t len = r.u64();
  std::string m(len, '\0');
  r.raw(m.data(), len);
  return json::parse(m);
}

json adam_to_json(const nd::AdamState& a) {
  json j;
  j["step"] = a.step;
  j["beta1"] = a.beta1;
  j["beta2"] = a.beta2;
  j["epsilon"] = a.epsilon;
  return j;
}

void adam_from_json(const json& j, nd::AdamState& a) {
  a.step = j.at("step").get<std::int64_t>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.epsilon = j.at("epsilon").get<double>();
}

const char* objective_name(TrainObjective o) { return o == TrainObjective::Iv ? "iv" : "naive"; }
const char* treatment_name(TreatmentKind k) {
  return k == TreatmentKind::Continuous ? "continuous" : "binary";
}

}  // namespace

void save_fitted_model(const std::string& path, const FittedModel& fm) {
  json manifest;
  manifest["version"] = 1;
  manifest["kind"] = "fitted_model";
  manifest["partition"] = {fm.model.partition.d0, fm.model.partition.d1, fm.model.partition.d2,
                           fm.model.partition.d3};
  manifest["treatment"] = treatment_name(fm.model.treatment_kind);
  manifest["objective"] = objective_name(fm.objective);
  manifest["has_encoder"] = fm.has_encoder;
  manifest["cov_spec"] = spec_to_json(fm.model.cov_spec);
  manifest["treat_spec"] = spec_to_json(fm.model.treat_spec);
  manifest["out_spec"] = spec_to_json(fm.model.out_spec);
  manifest["enc_spec"] = spec_to_json(fm.enc_spec);
  manifest["scaler"] = scaler_to_json(fm.scaler);
  manifest["warnings"] = fm.warnings;
  manifest["arrays"] = {"theta", "phi", "omega", "encoder"};

  Writer w(path);
  write_header(w, manifest);
  w.vec(fm.model.theta.values());
  w.vec(fm.model.phi.values());
  w.vec(fm.model.omega.values());
  w.vec(fm.encoder.values());
}

FittedModel load_fitted_model(const std::string& path) {
  Reader r(path);
  const json m = read_header(r);
  if (m.at("kind") != "fitted_model") throw std::runtime_error("checkpoint is not a fitted model");
  FittedModel fm;
  auto part = m.at("partition").get<std::vector<int>>();
  fm.model.partition = {part[0], part[1], part[2], part[3]};
  fm.model.treatment_kind = m.at("treatment") == "binary" ? TreatmentKind::Binary
                                                          : TreatmentKind::Continuous;
  fm.objective = m.at("objective") == "naive" ? TrainObjective::Naive : TrainObjective::Iv;
  fm.has_encoder = m.at("has_encoder").get<bool>();
  fm.model.cov_spec = spec_from_json(m.at("cov_spec"));
  fm.model.treat_spec = spec_from_json(m.at("treat_spec"));
  fm.model.out_spec = spec_from_json(m.at("out_spec"));
  fm.enc_spec = spec_from_json(m.at("enc_spec"));
  fm.scaler = scaler_from_json(m.at("scaler"));
  fm.warnings = m.at("warnings").get<std::vector<std::string>>();

  fm.model.theta = nd::ParameterSet(fm.model.cov_spec);
  fm.model.phi = nd::ParameterSet(fm.model.treat_spec);
  fm.model.omega = nd::ParameterSet(fm.model.out_spec);
  fm.encoder = nd::ParameterSet(fm.enc_spec);
  fm.model.theta.values() = r.vec();
  fm.model.phi.values() = r.vec();
  fm.model.omega.values() = r.vec();
  fm.encoder.values() = r.vec();
  if (fm.model.theta.values().size() != nd::ParameterSet(fm.model.cov_spec).total_count())
    throw std::runtime_error("checkpoint: theta size mismatch");
  return fm;
}

void save_train_checkpoint(const std::string& path, const TrainCheckpoint& ck) {
  const auto& st = ck.state;
  json manifest;
  manifest["version"] = 1;
  manifest["kind"] = "train_state";
  manifest["epoch"] = st.epoch;
  manifest["n_subjects"] = st.latents.rows();
  manifest["partition"] = {st.model.partition.d0, st.model.partition.d1, st.model.partition.d2,
                           st.model.partition.d3};
  manifest["treatment"] = treatment_name(ck.treatment_kind);
  manifest["objective"] = objective_name(ck.objective);
  manifest["variant"] = ck.variant == bench::Variant::Lowdim ? "lowdim" : "vector_proxy";
  manifest["has_encoder"] = ck.has_encoder;
  manifest["cov_spec"] = spec_to_json(st.model.cov_spec);
  manifest["treat_spec"] = spec_to_json(st.model.treat_spec);
  manifest["out_spec"] = spec_to_json(st.model.out_spec);
  manifest["enc_spec"] = spec_to_json(st.enc_spec);
  manifest["scaler"] = scaler_to_json(ck.scaler);
  manifest["adam_theta"] = adam_to_json(st.adam_theta);
  manifest["adam_phi"] = adam_to_json(st.adam_phi);
  manifest["adam_omega"] = adam_to_json(st.adam_omega);
  manifest["arrays"] = {"theta", "phi",      "omega",    "encoder",     "adam_theta_m",
                        "adam_theta_v", "adam_phi_m", "adam_phi_v", "adam_omega_m",
                        "adam_omega_v", "latents",    "latent_m",   "latent_v",
                        "latent_step"};

  Writer w(path);
  write_header(w, manifest);
  w.vec(st.model.theta.values());
  w.vec(st.model.phi.values());
  w.vec(st.model.omega.values());
  w.vec(st.encoder.values());
  w.vec(st.adam_theta.m);
  w.vec(st.adam_theta.v);
  w.vec(st.adam_phi.m);
  w.vec(st.adam_phi.v);
  w.vec(st.adam_omega.m);
  w.vec(st.adam_omega.v);
  w.mat(st.latents);
  w.mat(st.latent_m);
  w.mat(st.latent_v);
  VectorXd steps(st.latent_step.size());
  for (long i = 0; i < steps.size(); ++i) steps[i] = static_cast<double>(st.latent_step[i]);
  w.vec(steps);
}

TrainCheckpoint load_train_checkpoint(const std::string& path) {
  Reader r(path);
  const json m = read_header(r);
  if (m.at("kind") != "train_state") throw std::runtime_error("checkpoint is not a train state");
  TrainCheckpoint ck;
  auto& st = ck.state;
  auto part = m.at("partition").get<std::vector<int>>();
  st.model.partition = {part[0], part[1], part[2], part[3]};
  ck.treatment_kind = m.at("treatment") == "binary" ? TreatmentKind::Binary
                                                    : TreatmentKind::Continuous;
  st.model.treatment_kind = ck.treatment_kind;
  ck.objective = m.at("objective") == "naive" ? TrainObjective::Naive : TrainObjective::Iv;
  ck.variant = m.at("variant") == "vector_proxy" ? bench::Variant::VectorProxy
                                                 : bench::Variant::Lowdim;
  ck.has_encoder = m.at("has_encoder").get<bool>();
  st.epoch = m.at("epoch").get<int>();
  const long n = m.at("n_subjects").get<long>();
  st.model.cov_spec = spec_from_json(m.at("cov_spec"));
  st.model.treat_spec = spec_from_json(m.at("treat_spec"));
  st.model.out_spec = spec_from_json(m.at("out_spec"));
  st.enc_spec = spec_from_json(m.at("enc_spec"));
  ck.scaler = scaler_from_json(m.at("scaler"));
  adam_from_json(m.at("adam_theta"), st.adam_theta);
  adam_from_json(m.at("adam_phi"), st.adam_phi);
  adam_from_json(m.at("adam_omega"), st.adam_omega);

  st.model.theta = nd::ParameterSet(st.model.cov_spec);
  st.model.phi = nd::ParameterSet(st.model.treat_spec);
  st.model.omega = nd::ParameterSet(st.model.out_spec);
  st.encoder = nd::ParameterSet(st.enc_spec);
  st.model.theta.values() = r.vec();
  st.model.phi.values() = r.vec();
  st.model.omega.values() = r.vec();
  st.encoder.values() = r.vec();
  st.adam_theta.m = r.vec();
  st.adam_theta.v = r.vec();
  st.adam_phi.m = r.vec();
  st.adam_phi.v = r.vec();
  st.adam_omega.m = r.vec();
  st.adam_omega.v = r.vec();
  const int zd = st.model.partition.total();
  st.latents = r.mat(n, zd);
  st.latent_m = r.mat(n, zd);
  st.latent_v = r.mat(n, zd);
  VectorXd steps = r.vec();
  st.latent_step.resize(steps.size());
  for (long i = 0; i < steps.size(); ++i) st.latent_step[i] = static_cast<std::int64_t>(steps[i]);
  return ck;
}

std::string diagnostics_checksum(const bench::Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto fold = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  fold(ds.diag.u.data(), ds.diag.u.size() * sizeof(double));
  fold(ds.diag.eps.data(), ds.diag.eps.size() * sizeof(double));
  fold(ds.diag.t.data(), ds.diag.t.size() * sizeof(double));
  fold(ds.diag.s.data(), ds.diag.s.size() * sizeof(int));
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void write_dataset_csv(const std::string& path, const bench::Dataset& ds,
                       const std::string& sidecar_json) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "x,y,w";
  for (int j = 0; j < ds.v_dim(); ++j) out << ",v_" << j;
  out << "\n";
  for (long i = 0; i < ds.n(); ++i) {
    out << format_double(ds.x[i]) << ',' << format_double(ds.y[i]) << ',' << format_double(ds.w[i]);
    for (int j = 0; j < ds.v_dim(); ++j) out << ',' << format_double(ds.v(i, j));
    out << "\n";
  }
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot open for write: " + path + ".json");
  side << sidecar_json << "\n";
}

namespace {

std::vector<std::vector<double>> read_csv_numeric(const std::string& path, std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    size_t pos = 0;
    while (pos <= line.size()) {
      const size_t comma = line.find(',', pos);
      const std::string tok =
          comma == std::string::npos ? line.substr(pos) : line.substr(pos, comma - pos);
      row.push_back(std::stod(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

bench::Dataset read_dataset_csv(const std::string& path) {
  std::string header;
  auto rows = read_csv_numeric(path, header);
  if (header.rfind("x,y,w", 0) != 0) throw std::runtime_error("dataset csv: unexpected header");
  bench::Dataset ds;
  const long n = static_cast<long>(rows.size());
  const int vd = n > 0 ? static_cast<int>(rows[0].size()) - 3 : 0;
  ds.x.resize(n);
  ds.y.resize(n);
  ds.w.resize(n);
  ds.v.resize(n, vd);
  for (long i = 0; i < n; ++i) {
    ds.x[i] = rows[i][0];
    ds.y[i] = rows[i][1];
    ds.w[i] = rows[i][2];
    for (int j = 0; j < vd; ++j) ds.v(i, j) = rows[i][3 + j];
  }
  return ds;
}

void write_grid_csv(const std::string& path, const bench::EvaluationGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "x,g0";
  for (int j = 0; j < g.v.cols(); ++j) out << ",v_" << j;
  out << "\n";
  for (long r = 0; r < g.rows(); ++r) {
    out << format_double(g.x[r]) << ',' << format_double(g.g0[r]);
    for (int j = 0; j < g.v.cols(); ++j) out << ',' << format_double(g.v(r, j));
    out << "\n";
  }
}

bench::EvaluationGrid read_grid_csv(const std::string& path) {
  std::string header;
  auto rows = read_csv_numeric(path, header);
  if (header.rfind("x,g0", 0) != 0) throw std::runtime_error("grid csv: unexpected header");
  bench::EvaluationGrid g;
  const long n = static_cast<long>(rows.size());
  const int vd = n > 0 ? static_cast<int>(rows[0].size()) - 2 : 0;
  g.x.resize(n);
  g.g0.resize(n);
  g.v.resize(n, vd);
  for (long i = 0; i < n; ++i) {
    g.x[i] = rows[i][0];
    g.g0[i] = rows[i][1];
    for (int j = 0; j < vd; ++j) g.v(i, j) = rows[i][2 + j];
  }
  return g;
}

}  // namespace bgmiv::io
