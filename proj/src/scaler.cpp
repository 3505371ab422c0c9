#include "bgmiv/scaler.hpp"

#include <cmath>
#include <stdexcept>

namespace bgmiv {

namespace {
constexpr double kStdFloor = 1e-6;

double col_std(const VectorXd& c, double mean) {
  if (c.size() < 1) return 1.0;
  const double var = (c.array() - mean).square().sum() / static_cast<double>(c.size());
  const double sd = std::sqrt(var);
  return sd < kStdFloor ? 1.0 : sd;
}

void require_fitted(const ScalerSpec& s) {
  if (!s.fitted) throw std::runtime_error("ScalerSpec: transform used before fit");
}
}  // namespace

ScalerSpec ScalerSpec::identity(int v_dim) {
  ScalerSpec s;
  s.kind = ScalerKind::Identity;
  s.fitted = true;
  s.v_mean = VectorXd::Zero(v_dim);
  s.v_std = VectorXd::Ones(v_dim);
  return s;
}

ScalerSpec ScalerSpec::fixed_dfiv(int v_dim) {
  ScalerSpec s;
  s.kind = ScalerKind::FixedDfiv;
  s.fitted = true;
  s.x_mean = 17.779;
  s.x_std = 3.7;
  s.y_mean = -292.1;
  s.y_std = 158.0;
  s.v_mean = VectorXd::Zero(v_dim);
  s.v_std = VectorXd::Ones(v_dim);
  return s;
}

ScalerSpec ScalerSpec::standardize(const VectorXd& x, const VectorXd& y, const MatrixXd& v,
                                   const VectorXd& w) {
  ScalerSpec s;
  s.kind = ScalerKind::StandardizeFit;
  s.fitted = true;
  s.x_mean = x.mean();
  s.x_std = col_std(x, s.x_mean);
  s.y_mean = y.mean();
  s.y_std = col_std(y, s.y_mean);
  s.w_mean = w.mean();
  s.w_std = col_std(w, s.w_mean);
  s.v_mean.resize(v.cols());
  s.v_std.resize(v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    s.v_mean[j] = v.col(j).mean();
    s.v_std[j] = col_std(v.col(j), s.v_mean[j]);
  }
  return s;
}

double ScalerSpec::apply_x(double x) const {
  require_fitted(*this);
  return (x - x_mean) / x_std;
}
double ScalerSpec::invert_x(double x) const {
  require_fitted(*this);
  return x * x_std + x_mean;
}
double ScalerSpec::apply_y(double y) const {
  require_fitted(*this);
  return (y - y_mean) / y_std;
}
double ScalerSpec::invert_y(double y) const {
  require_fitted(*this);
  return y * y_std + y_mean;
}
double ScalerSpec::apply_w(double w) const {
  require_fitted(*this);
  return (w - w_mean) / w_std;
}

VectorXd ScalerSpec::apply_x(const VectorXd& x) const {
  require_fitted(*this);
  return (x.array() - x_mean) / x_std;
}
VectorXd ScalerSpec::apply_y(const VectorXd& y) const {
  require_fitted(*this);
  return (y.array() - y_mean) / y_std;
}
VectorXd ScalerSpec::apply_w(const VectorXd& w) const {
  require_fitted(*this);
  return (w.array() - w_mean) / w_std;
}

MatrixXd ScalerSpec::apply_v(const MatrixXd& v) const {
  require_fitted(*this);
  if (v.cols() != v_mean.size()) throw std::runtime_error("ScalerSpec: v dim mismatch");
  return (v.rowwise() - v_mean.transpose()).array().rowwise() / v_std.transpose().array();
}

VectorXd ScalerSpec::apply_v_row(const VectorXd& v) const {
  require_fitted(*this);
  if (v.size() != v_mean.size()) throw std::runtime_error("ScalerSpec: v dim mismatch");
  return (v - v_mean).cwiseQuotient(v_std);
}

MatrixXd ScalerSpec::invert_v(const MatrixXd& v) const {
  require_fitted(*this);
  if (v.cols() != v_mean.size()) throw std::runtime_error("ScalerSpec: v dim mismatch");
  return (v.array().rowwise() * v_std.transpose().array()).rowwise() + v_mean.transpose().array();
}

}  // namespace bgmiv
