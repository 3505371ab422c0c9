#pragma once

#include <Eigen/Dense>

namespace bgmiv {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ScalerKind { StandardizeFit, FixedDfiv, Identity };

// Column transforms for (X, Y, V, W). standardize_fit learns training-set
// means/stds (stds below 1e-6 replaced by 1); fixed_dfiv applies
// X -> (X-17.779)/3.7 and Y -> (Y+292.1)/158.0 with V, W untouched.
struct ScalerSpec {
  ScalerKind kind = ScalerKind::Identity;
  bool fitted = false;
  double x_mean = 0.0, x_std = 1.0;
  double y_mean = 0.0, y_std = 1.0;
  double w_mean = 0.0, w_std = 1.0;
  VectorXd v_mean, v_std;  // sized v_dim for standardize_fit, empty otherwise

  static ScalerSpec identity(int v_dim);
  static ScalerSpec fixed_dfiv(int v_dim);
  static ScalerSpec standardize(const VectorXd& x, const VectorXd& y, const MatrixXd& v,
                                const VectorXd& w);

  double apply_x(double x) const;
  double invert_x(double x) const;
  double apply_y(double y) const;
  double invert_y(double y) const;
  double apply_w(double w) const;
  VectorXd apply_x(const VectorXd& x) const;
  VectorXd apply_y(const VectorXd& y) const;
  VectorXd apply_w(const VectorXd& w) const;
  MatrixXd apply_v(const MatrixXd& v) const;
  VectorXd apply_v_row(const VectorXd& v) const;
  MatrixXd invert_v(const MatrixXd& v) const;
};

}  // namespace bgmiv
