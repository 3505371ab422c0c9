#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgmiv/rng.hpp"

namespace bgmiv::nd {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Thrown when a forward/backward pass produces a NaN/Inf; carries the first
// offending node in what().
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { LeakyRelu, Relu, Linear };
enum class HeadTransform { Identity, Softplus, Sigmoid };

struct HeadSpec {
  std::string name;
  int dim = 1;
  HeadTransform transform = HeadTransform::Identity;
  double floor = 0.0;  // added after the transform; variance heads use 1e-4
};

struct NetworkSpec {
  std::string name = "net";  // used in diagnostics
  int input_dim = 0;
  std::vector<int> hidden_widths;  // empty means a single affine map
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = 0.2;
  std::vector<HeadSpec> heads;
  double l2_coefficient = 0.0;

  void validate() const;
  int last_hidden_dim() const { return hidden_widths.empty() ? input_dim : hidden_widths.back(); }
  int hidden_count() const { return static_cast<int>(hidden_widths.size()); }
  int head_count() const { return static_cast<int>(heads.size()); }
  int head_index(std::string_view name) const;  // throws if absent
};

enum class ParamKind { Weight, Bias };

// Flat parameter vector with per-layer (weight, bias) views. Layout, in order:
// hidden layers 0..H-1, then heads H..H+K-1; within a layer the weight matrix
// (fan_in x fan_out) is stored row-major, followed by the bias (fan_out).
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(const NetworkSpec& spec);

  Eigen::Map<RowMat> weight(int layer);
  Eigen::Map<const RowMat> weight(int layer) const;
  Eigen::Map<VectorXd> bias(int layer);
  Eigen::Map<const VectorXd> bias(int layer) const;

  int layer_count() const { return static_cast<int>(shapes_.size()); }
  std::pair<int, int> weight_shape(int layer) const { return shapes_.at(layer); }
  std::ptrdiff_t total_count() const { return values_.size(); }

  VectorXd& values() { return values_; }
  const VectorXd& values() const { return values_; }

 private:
  std::vector<std::pair<int, int>> shapes_;   // (fan_in, fan_out) per layer
  std::vector<std::ptrdiff_t> w_off_, b_off_;
  VectorXd values_;
};

// Xavier-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
// Draw order: layers in layout order, weight entries row-major.
ParameterSet xavier_init(const NetworkSpec& spec, RngStream& rng);

// Batched forward pass over N samples (rows). Keeps everything needed by
// backward(). Head outputs are post-transform.
struct Forward {
  MatrixXd input;                 // N x input_dim
  std::vector<MatrixXd> hidden;   // post-activation, N x width
  std::vector<MatrixXd> head_raw; // pre-transform, N x dim
  std::vector<MatrixXd> head_out; // post-transform (+floor), N x dim
  const MatrixXd& last_hidden() const { return hidden.empty() ? input : hidden.back(); }
};

// check_finite: verify each stage and throw NonFiniteError naming the first
// bad layer. The training hot path validates at the loss level instead.
Forward forward(const NetworkSpec& spec, const ParameterSet& params,
                const Eigen::Ref<const MatrixXd>& input, bool check_finite = false);

// Single-sample convenience used by the per-subject model API and tests.
std::map<std::string, VectorXd> forward_heads(const NetworkSpec& spec, const ParameterSet& params,
                                              const VectorXd& input);

struct Gradients {
  VectorXd param;   // same layout as ParameterSet::values()
  MatrixXd input;   // N x input_dim
};

// Reverse-mode gradients given cotangents of each head OUTPUT (post-transform),
// one N x dim matrix per head in declared order. Gradients are accumulated
// into `out` (callers zero it first when they want a fresh gradient), so one
// backward pass can serve several objective terms.
void backward(const NetworkSpec& spec, const ParameterSet& params, const Forward& fwd,
              const std::vector<MatrixXd>& head_cotangents, Gradients& out,
              bool want_param_grad = true, bool want_input_grad = false);

// L2 penalty on weights only (biases exempt), matching the dense-layer
// regularization the specs carry: penalty = l2 * sum(W^2), grad = 2*l2*W.
double l2_penalty(const NetworkSpec& spec, const ParameterSet& params);
void add_l2_gradient(const NetworkSpec& spec, const ParameterSet& params, VectorXd& param_grad);

struct AdamState {
  VectorXd m, v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::ptrdiff_t n) : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}
};

// Bias-corrected Adam descent step. Throws on non-finite gradient entries and
// leaves the parameters unchanged in that case.
void adam_step(AdamState& state, Eigen::Ref<VectorXd> params, const Eigen::Ref<const VectorXd>& grad,
               double learning_rate);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double finite_difference_check(const std::function<double(const VectorXd&)>& objective,
                               const VectorXd& at, const VectorXd& analytic, double step);

// Elementwise activation and its backward (derivative recovered from the
// post-activation values), exposed for fused kernels.
void activation_forward(MatrixXd& m, Activation act, double slope);
void activation_backward(MatrixXd& delta, const MatrixXd& post, Activation act, double slope);

// Stable scalar helpers shared across modules.
double softplus(double x);
double sigmoid(double x);

// Raises the glibc mmap threshold once per process. The training loop churns
// through ~0.5 MB Eigen temporaries; with the default threshold every one is
// a fresh mmap/munmap and the page faults dominate the GEMMs (~4x slowdown).
void tune_allocator();

}  // namespace bgmiv::nd
