#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bgmiv/nd.hpp"

using namespace bgmiv;
using namespace bgmiv::nd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

NetworkSpec scalar_affine_spec() {
  NetworkSpec s;
  s.name = "affine";
  s.input_dim = 1;
  s.heads = {{"out", 1, HeadTransform::Identity, 0.0}};
  return s;
}

NetworkSpec small_spec() {
  NetworkSpec s;
  s.name = "small";
  s.input_dim = 3;
  s.hidden_widths = {8, 6, 5};
  s.activation = Activation::LeakyRelu;
  s.leaky_slope = 0.2;
  s.heads = {{"mean", 2, HeadTransform::Identity, 0.0},
             {"rawvar", 2, HeadTransform::Softplus, 1e-4},
             {"prob", 1, HeadTransform::Sigmoid, 0.0}};
  return s;
}

}  // namespace

TEST_CASE("forward: single affine layer, hand arithmetic") {
  auto spec = scalar_affine_spec();
  ParameterSet p(spec);
  p.weight(0)(0, 0) = 2.0;
  p.bias(0)(0) = 1.0;
  VectorXd in(1);
  in << 3.0;
  auto out = forward_heads(spec, p, in);
  CHECK(out.at("out")(0) == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("forward: all-zero parameters give zero identity head") {
  auto spec = small_spec();
  ParameterSet p(spec);
  RngStream rng(7);
  VectorXd in(3);
  in << 0.3, -1.2, 2.0;
  auto out = forward_heads(spec, p, in);
  CHECK(out.at("mean").norm() == 0.0);
}

TEST_CASE("forward: leaky relu slope 0.2 on negative pre-activation") {
  NetworkSpec s;
  s.name = "leaky";
  s.input_dim = 1;
  s.hidden_widths = {1};
  s.activation = Activation::LeakyRelu;
  s.leaky_slope = 0.2;
  s.heads = {{"out", 1, HeadTransform::Identity, 0.0}};
  ParameterSet p(s);
  p.weight(0)(0, 0) = 1.0;  // hidden pre-activation = input
  p.weight(1)(0, 0) = 1.0;  // head passes hidden through
  VectorXd in(1);
  in << -1.0;
  auto out = forward_heads(s, p, in);
  CHECK(out.at("out")(0) == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("forward: dimension mismatch names the network") {
  auto spec = small_spec();
  ParameterSet p(spec);
  VectorXd in(2);
  in << 1.0, 2.0;
  CHECK_THROWS_WITH_AS(forward_heads(spec, p, in),
                       doctest::Contains("small layer 0"), std::invalid_argument);
}

TEST_CASE("head transforms: softplus strictly positive, sigmoid in (0,1)") {
  auto spec = small_spec();
  RngStream rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    auto p = xavier_init(spec, rng);
    p.values() *= 5.0;  // push pre-activations around
    VectorXd in(3);
    for (int i = 0; i < 3; ++i) in[i] = 10.0 * (rng.u01() - 0.5);
    auto out = forward_heads(spec, p, in);
    CHECK(out.at("rawvar").minCoeff() > 0.0);
    CHECK(out.at("prob")(0) > 0.0);
    CHECK(out.at("prob")(0) < 1.0);
  }
}

TEST_CASE("forward and backward are pure: bit-identical reruns") {
  auto spec = small_spec();
  RngStream rng(3);
  auto p = xavier_init(spec, rng);
  MatrixXd in(4, 3);
  for (int i = 0; i < in.size(); ++i) in.data()[i] = rng.normal();
  auto f1 = forward(spec, p, in);
  auto f2 = forward(spec, p, in);
  for (int k = 0; k < spec.head_count(); ++k) {
    CHECK(f1.head_out[k] == f2.head_out[k]);
  }
  std::vector<MatrixXd> cots;
  for (int k = 0; k < spec.head_count(); ++k) cots.push_back(MatrixXd::Ones(4, spec.heads[k].dim));
  Gradients g1, g2;
  backward(spec, p, f1, cots, g1, true, true);
  backward(spec, p, f2, cots, g2, true, true);
  CHECK(g1.param == g2.param);
  CHECK(g1.input == g2.input);
}

TEST_CASE("xavier_init: deterministic, bounded, zero biases") {
  auto spec = small_spec();
  RngStream a(11), b(11);
  auto p1 = xavier_init(spec, a);
  auto p2 = xavier_init(spec, b);
  CHECK(p1.values() == p2.values());
  for (int l = 0; l < p1.layer_count(); ++l) CHECK(p1.bias(l).norm() == 0.0);

  // fan_in = fan_out = 1 bound is sqrt(3)
  auto aff = scalar_affine_spec();
  RngStream c(5);
  const double bound = std::sqrt(6.0 / 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    auto p = xavier_init(aff, c);
    CHECK(std::abs(p.weight(0)(0, 0)) <= bound);
  }
}

TEST_CASE("backward: objective p^2 gives gradient 6 at p=3") {
  // single parameter acting multiplicatively: out = w * 1, objective out^2
  auto spec = scalar_affine_spec();
  ParameterSet p(spec);
  p.weight(0)(0, 0) = 3.0;
  MatrixXd in = MatrixXd::Ones(1, 1);
  auto f = forward(spec, p, in);
  const double y = f.head_out[0](0, 0);
  Gradients g;
  std::vector<MatrixXd> cot = {MatrixXd::Constant(1, 1, 2.0 * y)};  // d(y^2)/dy
  backward(spec, p, f, cot, g, true, false);
  CHECK(g.param(0) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward: input gradient of affine map equals weight row") {
  NetworkSpec s;
  s.name = "aff3";
  s.input_dim = 3;
  s.heads = {{"out", 1, HeadTransform::Identity, 0.0}};
  ParameterSet p(s);
  p.weight(0)(0, 0) = 1.5;
  p.weight(0)(1, 0) = -2.5;
  p.weight(0)(2, 0) = 0.25;
  MatrixXd in(1, 3);
  in << 0.1, 0.2, 0.3;
  auto f = forward(s, p, in);
  Gradients g;
  backward(s, p, f, {MatrixXd::Ones(1, 1)}, g, false, true);
  CHECK(g.input(0, 0) == doctest::Approx(1.5));
  CHECK(g.input(0, 1) == doctest::Approx(-2.5));
  CHECK(g.input(0, 2) == doctest::Approx(0.25));
}

namespace {

// Gaussian log-likelihood of fixed targets under (mean, softplus rawvar) heads;
// analytic gradient via backward, used for the finite-difference property.
double gauss_objective(const NetworkSpec& spec, const ParameterSet& p, const MatrixXd& in,
                       const MatrixXd& targets, VectorXd* pgrad, MatrixXd* igrad) {
  auto f = forward(spec, p, in);
  const MatrixXd& mu = f.head_out[0];
  const MatrixXd& var = f.head_out[1];
  double ll = 0.0;
  MatrixXd dmu(in.rows(), mu.cols()), dvar(in.rows(), mu.cols());
  for (int i = 0; i < mu.rows(); ++i)
    for (int j = 0; j < mu.cols(); ++j) {
      const double d = targets(i, j) - mu(i, j), v = var(i, j);
      ll += -0.5 * std::log(2.0 * M_PI * v) - d * d / (2.0 * v);
      dmu(i, j) = d / v;
      dvar(i, j) = -0.5 / v + d * d / (2.0 * v * v);
    }
  if (pgrad || igrad) {
    Gradients g;
    backward(spec, p, f, {dmu, dvar, MatrixXd()}, g, pgrad != nullptr, igrad != nullptr);
    if (pgrad) *pgrad = g.param;
    if (igrad) *igrad = g.input;
  }
  return ll;
}

}  // namespace

TEST_CASE("gradients match central finite differences on a random 3-layer net") {
  auto spec = small_spec();
  RngStream rng(2024);
  for (int rep = 0; rep < 5; ++rep) {
    auto p = xavier_init(spec, rng);
    MatrixXd in(2, 3), targets(2, 2);
    for (int i = 0; i < in.size(); ++i) in.data()[i] = rng.normal();
    for (int i = 0; i < targets.size(); ++i) targets.data()[i] = rng.normal();

    VectorXd pgrad;
    MatrixXd igrad;
    gauss_objective(spec, p, in, targets, &pgrad, &igrad);

    auto obj_params = [&](const VectorXd& v) {
      ParameterSet q = p;
      q.values() = v;
      return gauss_objective(spec, q, in, targets, nullptr, nullptr);
    };
    CHECK(finite_difference_check(obj_params, p.values(), pgrad, 1e-5) < 1e-4);

    auto obj_inputs = [&](const VectorXd& v) {
      MatrixXd in2 = Eigen::Map<const MatrixXd>(v.data(), in.rows(), in.cols());
      return gauss_objective(spec, p, in2, targets, nullptr, nullptr);
    };
    VectorXd in_flat = Eigen::Map<const VectorXd>(in.data(), in.size());
    VectorXd ig_flat = Eigen::Map<const VectorXd>(igrad.data(), igrad.size());
    CHECK(finite_difference_check(obj_inputs, in_flat, ig_flat, 1e-5) < 1e-4);
  }
}

TEST_CASE("finite_difference_check: quadratic is exact, constant is zero") {
  auto quad = [](const VectorXd& v) { return v.squaredNorm(); };
  VectorXd at(3);
  at << 1.0, -2.0, 0.5;
  VectorXd grad = 2.0 * at;
  CHECK(finite_difference_check(quad, at, grad, 1e-4) < 1e-8);

  auto constant = [](const VectorXd&) { return 4.2; };
  VectorXd zero = VectorXd::Zero(3);
  CHECK(finite_difference_check(constant, at, zero, 1e-4) == 0.0);
}

TEST_CASE("l2 penalty and gradient cover weights only") {
  auto spec = scalar_affine_spec();
  spec.l2_coefficient = 0.1;
  ParameterSet p(spec);
  p.weight(0)(0, 0) = 3.0;
  p.bias(0)(0) = 5.0;
  CHECK(l2_penalty(spec, p) == doctest::Approx(0.1 * 9.0));
  VectorXd g = VectorXd::Zero(p.total_count());
  add_l2_gradient(spec, p, g);
  CHECK(g(0) == doctest::Approx(2.0 * 0.1 * 3.0));
  CHECK(g(1) == 0.0);  // bias exempt
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, increments step") {
  AdamState st(3);
  VectorXd p(3);
  p << 1.0, 2.0, 3.0;
  VectorXd p0 = p;
  adam_step(st, p, VectorXd::Zero(3), 1e-2);
  CHECK(p == p0);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first-step magnitude is lr*g/(|g|+eps)") {
  AdamState st(2);
  VectorXd p = VectorXd::Zero(2);
  VectorXd g(2);
  g << 0.5, -2.0;
  adam_step(st, p, g, 1e-3);
  for (int i = 0; i < 2; ++i) {
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + st.epsilon);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("adam: defaults beta1=0.9 beta2=0.99; lr=0 never moves parameters") {
  AdamState st(1);
  CHECK(st.beta1 == 0.9);
  CHECK(st.beta2 == 0.99);
  VectorXd p(1);
  p << 7.0;
  RngStream rng(1);
  for (int i = 0; i < 20; ++i) {
    VectorXd g(1);
    g << rng.normal();
    adam_step(st, p, g, 0.0);
  }
  CHECK(p(0) == 7.0);
}

TEST_CASE("adam: non-finite gradient rejected, parameters unchanged") {
  AdamState st(2);
  VectorXd p(2);
  p << 1.0, 2.0;
  VectorXd g(2);
  g << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(st, p, g, 1e-3), NonFiniteError);
  CHECK(p(0) == 1.0);
  CHECK(p(1) == 2.0);
  CHECK(st.step == 0);
}

TEST_CASE("parameter flat layout round-trips through weight/bias views") {
  auto spec = small_spec();
  RngStream rng(9);
  auto p = xavier_init(spec, rng);
  VectorXd flat = p.values();
  ParameterSet q(spec);
  q.values() = flat;
  for (int l = 0; l < p.layer_count(); ++l) {
    CHECK(q.weight(l) == p.weight(l));
    CHECK(q.bias(l) == p.bias(l));
  }
}

TEST_CASE("empty hidden_widths mean a single affine map with working gradients") {
  NetworkSpec s;
  s.name = "affine2";
  s.input_dim = 2;
  s.heads = {{"out", 2, HeadTransform::Identity, 0.0}};
  ParameterSet p(s);
  p.weight(0) << 1.0, 2.0, 3.0, 4.0;
  p.bias(0) << 0.5, -0.5;
  MatrixXd in(1, 2);
  in << 1.0, 1.0;
  auto f = forward(s, p, in);
  CHECK(f.head_out[0](0, 0) == doctest::Approx(4.5));
  CHECK(f.head_out[0](0, 1) == doctest::Approx(5.5));
  Gradients g;
  backward(s, p, f, {MatrixXd::Ones(1, 2)}, g, true, true);
  CHECK(g.input(0, 0) == doctest::Approx(3.0));  // 1 + 2
  CHECK(g.input(0, 1) == doctest::Approx(7.0));  // 3 + 4
}
