#include "bgmiv/nd.hpp"

#include <cmath>
#include <mutex>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace bgmiv::nd {

void activation_forward(MatrixXd& m, Activation act, double slope) {
  double* p = m.data();
  const std::ptrdiff_t n = m.size();
  switch (act) {
    case Activation::LeakyRelu:
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double v = p[i], s = slope * v;
        p[i] = v > s ? v : s;
      }
      break;
    case Activation::Relu:
      for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
      break;
    case Activation::Linear:
      break;
  }
}

void activation_backward(MatrixXd& delta, const MatrixXd& post, Activation act, double slope) {
  double* d = delta.data();
  const double* h = post.data();
  const std::ptrdiff_t n = delta.size();
  switch (act) {
    case Activation::LeakyRelu:
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double m = h[i] > 0.0 ? 1.0 : slope;
        d[i] = d[i] * m;
      }
      break;
    case Activation::Relu:
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double m = h[i] > 0.0 ? 1.0 : 0.0;
        d[i] = d[i] * m;
      }
      break;
    case Activation::Linear:
      break;
  }
}

namespace {

[[noreturn]] void throw_nonfinite(const NetworkSpec& spec, const std::string& where) {
  throw NonFiniteError(spec.name + ": non-finite values at " + where);
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument(name + ": input_dim must be >= 1");
  for (std::size_t i = 0; i < hidden_widths.size(); ++i)
    if (hidden_widths[i] < 1)
      throw std::invalid_argument(name + ": hidden layer " + std::to_string(i) + " width must be >= 1");
  if (heads.empty()) throw std::invalid_argument(name + ": at least one head required");
  for (const auto& h : heads) {
    if (h.dim < 1) throw std::invalid_argument(name + ": head '" + h.name + "' output_dim must be >= 1");
    if (h.floor < 0.0) throw std::invalid_argument(name + ": head '" + h.name + "' floor must be >= 0");
  }
  for (std::size_t i = 0; i < heads.size(); ++i)
    for (std::size_t j = i + 1; j < heads.size(); ++j)
      if (heads[i].name == heads[j].name)
        throw std::invalid_argument(name + ": duplicate head name '" + heads[i].name + "'");
  if (l2_coefficient < 0.0) throw std::invalid_argument(name + ": l2_coefficient must be >= 0");
  if (activation == Activation::LeakyRelu && (leaky_slope < 0.0 || leaky_slope >= 1.0))
    throw std::invalid_argument(name + ": leaky_slope must be in [0,1)");
}

int NetworkSpec::head_index(std::string_view head_name) const {
  for (int i = 0; i < head_count(); ++i)
    if (heads[i].name == head_name) return i;
  throw std::invalid_argument(name + ": no head named '" + std::string(head_name) + "'");
}

ParameterSet::ParameterSet(const NetworkSpec& spec) {
  spec.validate();
  int in = spec.input_dim;
  for (int w : spec.hidden_widths) {
    shapes_.emplace_back(in, w);
    in = w;
  }
  for (const auto& h : spec.heads) shapes_.emplace_back(spec.last_hidden_dim(), h.dim);

  std::ptrdiff_t off = 0;
  for (auto [fi, fo] : shapes_) {
    w_off_.push_back(off);
    off += static_cast<std::ptrdiff_t>(fi) * fo;
    b_off_.push_back(off);
    off += fo;
  }
  values_ = VectorXd::Zero(off);
}

Eigen::Map<RowMat> ParameterSet::weight(int layer) {
  auto [fi, fo] = shapes_.at(layer);
  return {values_.data() + w_off_[layer], fi, fo};
}
Eigen::Map<const RowMat> ParameterSet::weight(int layer) const {
  auto [fi, fo] = shapes_.at(layer);
  return {values_.data() + w_off_[layer], fi, fo};
}
Eigen::Map<VectorXd> ParameterSet::bias(int layer) {
  return {values_.data() + b_off_.at(layer), shapes_[layer].second};
}
Eigen::Map<const VectorXd> ParameterSet::bias(int layer) const {
  return {values_.data() + b_off_.at(layer), shapes_[layer].second};
}

ParameterSet xavier_init(const NetworkSpec& spec, RngStream& rng) {
  ParameterSet p(spec);
  for (int l = 0; l < p.layer_count(); ++l) {
    auto [fi, fo] = p.weight_shape(l);
    const double bound = std::sqrt(6.0 / (fi + fo));
    auto w = p.weight(l);
    for (int r = 0; r < fi; ++r)
      for (int c = 0; c < fo; ++c) w(r, c) = bound * (2.0 * rng.u01() - 1.0);
    // biases stay zero
  }
  return p;
}

Forward forward(const NetworkSpec& spec, const ParameterSet& params,
                const Eigen::Ref<const MatrixXd>& input, bool check_finite) {
  if (input.cols() != spec.input_dim) {
    std::ostringstream os;
    os << spec.name << " layer 0: expected input dim " << spec.input_dim << ", got " << input.cols();
    throw std::invalid_argument(os.str());
  }
  Forward f;
  f.input = input;
  const MatrixXd* cur = &f.input;
  for (int l = 0; l < spec.hidden_count(); ++l) {
    MatrixXd h = (*cur) * params.weight(l);
    h.rowwise() += params.bias(l).transpose();
    activation_forward(h, spec.activation, spec.leaky_slope);
    f.hidden.push_back(std::move(h));
    cur = &f.hidden.back();
    if (check_finite && !f.hidden.back().allFinite())
      throw_nonfinite(spec, "hidden layer " + std::to_string(l));
  }
  const int hc = spec.hidden_count();
  for (int k = 0; k < spec.head_count(); ++k) {
    const auto& hd = spec.heads[k];
    MatrixXd raw = (*cur) * params.weight(hc + k);
    raw.rowwise() += params.bias(hc + k).transpose();
    MatrixXd out;
    switch (hd.transform) {
      case HeadTransform::Identity:
        out = raw;
        break;
      case HeadTransform::Softplus:
        // max(x,0) + log(1+exp(-|x|)) with SIMD exp/log; the log1p difference
        // is below one ulp of 1 and vanishes against the variance floor
        out = (raw.array().max(0.0) + (1.0 + (-raw.array().abs()).exp()).log()).matrix();
        break;
      case HeadTransform::Sigmoid:
        // clamp into the open interval; the true value saturates to 0/1 in
        // doubles long after the derivative has underflowed
        out = raw.unaryExpr([](double x) {
          const double s = sigmoid(x);
          constexpr double lo = 2.2250738585072014e-308;  // DBL_MIN
          constexpr double hi = 1.0 - 1.1102230246251565e-16;
          return s < lo ? lo : (s > hi ? hi : s);
        });
        break;
    }
    if (hd.floor != 0.0) out.array() += hd.floor;
    if (check_finite && !out.allFinite()) throw_nonfinite(spec, "head '" + hd.name + "'");
    f.head_raw.push_back(std::move(raw));
    f.head_out.push_back(std::move(out));
  }
  return f;
}

std::map<std::string, VectorXd> forward_heads(const NetworkSpec& spec, const ParameterSet& params,
                                              const VectorXd& input) {
  Forward f = forward(spec, params, input.transpose(), /*check_finite=*/true);
  std::map<std::string, VectorXd> out;
  for (int k = 0; k < spec.head_count(); ++k) out[spec.heads[k].name] = f.head_out[k].row(0).transpose();
  return out;
}

void backward(const NetworkSpec& spec, const ParameterSet& params, const Forward& fwd,
              const std::vector<MatrixXd>& head_cotangents, Gradients& out,
              bool want_param_grad, bool want_input_grad) {
  if (static_cast<int>(head_cotangents.size()) != spec.head_count())
    throw std::invalid_argument(spec.name + ": backward needs one cotangent per head");
  if (want_param_grad && out.param.size() != params.total_count())
    out.param = VectorXd::Zero(params.total_count());

  const int hc = spec.hidden_count();
  const MatrixXd& last = fwd.last_hidden();
  const Eigen::Index n = last.rows();

  MatrixXd d_last = MatrixXd::Zero(n, last.cols());
  for (int k = 0; k < spec.head_count(); ++k) {
    const auto& hd = spec.heads[k];
    if (head_cotangents[k].size() == 0) continue;  // head not used by the objective
    MatrixXd d_raw = head_cotangents[k];
    switch (hd.transform) {
      case HeadTransform::Identity:
        break;
      case HeadTransform::Softplus:
        // d softplus = sigmoid(raw) = 1/(1+exp(-raw)), SIMD and overflow-safe
        d_raw.array() *= (1.0 + (-fwd.head_raw[k].array()).exp()).inverse();
        break;
      case HeadTransform::Sigmoid: {
        double* d = d_raw.data();
        const double* o = fwd.head_out[k].data();
        for (std::ptrdiff_t i = 0; i < d_raw.size(); ++i) {
          const double s = o[i] - hd.floor;
          d[i] *= s * (1.0 - s);
        }
        break;
      }
    }
    if (want_param_grad) {
      const std::ptrdiff_t w_begin = params.weight(hc + k).data() - params.values().data();
      const std::ptrdiff_t b_begin = params.bias(hc + k).data() - params.values().data();
      Eigen::Map<RowMat> gw(out.param.data() + w_begin, params.weight_shape(hc + k).first,
                            params.weight_shape(hc + k).second);
      Eigen::Map<VectorXd> gb(out.param.data() + b_begin, params.weight_shape(hc + k).second);
      gw.noalias() += last.transpose() * d_raw;
      gb.noalias() += d_raw.colwise().sum().transpose();
    }
    d_last.noalias() += d_raw * params.weight(hc + k).transpose();
  }

  MatrixXd delta = std::move(d_last);
  for (int l = hc - 1; l >= 0; --l) {
    activation_backward(delta, fwd.hidden[l], spec.activation, spec.leaky_slope);
    const MatrixXd& below = (l == 0) ? fwd.input : fwd.hidden[l - 1];
    if (want_param_grad) {
      const std::ptrdiff_t w_begin = params.weight(l).data() - params.values().data();
      const std::ptrdiff_t b_begin = params.bias(l).data() - params.values().data();
      Eigen::Map<RowMat> gw(out.param.data() + w_begin, params.weight_shape(l).first,
                            params.weight_shape(l).second);
      Eigen::Map<VectorXd> gb(out.param.data() + b_begin, params.weight_shape(l).second);
      gw.noalias() += below.transpose() * delta;
      gb.noalias() += delta.colwise().sum().transpose();
    }
    if (l > 0 || want_input_grad) {
      MatrixXd next = delta * params.weight(l).transpose();
      delta = std::move(next);
    }
  }
  if (want_input_grad) {
    if (out.input.rows() != n || out.input.cols() != spec.input_dim)
      out.input = MatrixXd::Zero(n, spec.input_dim);
    out.input += delta;  // when hc == 0, delta is already d(input)
  }
}

double l2_penalty(const NetworkSpec& spec, const ParameterSet& params) {
  if (spec.l2_coefficient == 0.0) return 0.0;
  double s = 0.0;
  for (int l = 0; l < params.layer_count(); ++l) s += params.weight(l).squaredNorm();
  return spec.l2_coefficient * s;
}

void add_l2_gradient(const NetworkSpec& spec, const ParameterSet& params, VectorXd& param_grad) {
  if (spec.l2_coefficient == 0.0) return;
  for (int l = 0; l < params.layer_count(); ++l) {
    const std::ptrdiff_t w_begin = params.weight(l).data() - params.values().data();
    auto [fi, fo] = params.weight_shape(l);
    Eigen::Map<RowMat> g(param_grad.data() + w_begin, fi, fo);
    g += 2.0 * spec.l2_coefficient * params.weight(l);
  }
}

void adam_step(AdamState& state, Eigen::Ref<VectorXd> params, const Eigen::Ref<const VectorXd>& grad,
               double learning_rate) {
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter size mismatch");
  if (grad.size() != params.size()) throw std::invalid_argument("adam_step: gradient/parameter size mismatch");
  if (!grad.allFinite()) throw NonFiniteError("adam_step: non-finite gradient entry");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -=
      learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

double finite_difference_check(const std::function<double(const VectorXd&)>& objective,
                               const VectorXd& at, const VectorXd& analytic, double step) {
  if (analytic.size() != at.size())
    throw std::invalid_argument("finite_difference_check: gradient size mismatch");
  VectorXd x = at;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = objective(x);
    x[i] = orig - step;
    const double dn = objective(x);
    x[i] = orig;
    const double fd = (up - dn) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    if (err > worst) worst = err;
  }
  return worst;
}

void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag flag;
  std::call_once(flag, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace bgmiv::nd
