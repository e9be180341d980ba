#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "latentmimic/nn/dense_net.hpp"
#include "latentmimic/nn/optimizer.hpp"
#include "latentmimic/nn/serialize.hpp"
#include "latentmimic/nn/tape.hpp"

using namespace lm::nn;

namespace {

// Scalar loss of a recorded forward pass: sum of all outputs. For gaussian
// heads the pre-head output (mean and log-std rows) is summed.
double tape_loss_and_backward(DenseNet& net, const Mat& x) {
  GradientTape tape;
  auto out = net.forward(tape, tape.input(x));
  auto loss = tape.sum(out);
  tape.backward(loss);
  return tape.value(loss)(0, 0);
}

double plain_loss(const DenseNet& net, const Mat& x) {
  return net.evaluate(x).sum();
}

// Central finite difference of plain_loss w.r.t. every parameter entry,
// compared against the taped gradient. Returns the max relative error.
double max_gradient_rel_error(DenseNet& net, const Mat& x, double step) {
  net.zero_grad();
  tape_loss_and_backward(net, x);
  double worst = 0.0;
  for (Param* p : net.params()) {
    for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
      for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + step;
        const double up = plain_loss(net, x);
        p->value(i, j) = saved - step;
        const double dn = plain_loss(net, x);
        p->value(i, j) = saved;
        const double fd = (up - dn) / (2.0 * step);
        const double ad = p->grad(i, j);
        const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
        worst = std::max(worst, std::abs(fd - ad) / denom);
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("elu activation values") {
  // [1,1,1] net with identity weights exposes one hidden ELU unit.
  DenseNet net({1, 1, 1}, Activation::kElu, OutputHead::kDeterministic);
  net.weights()[0].value(0, 0) = 1.0;
  net.weights()[1].value(0, 0) = 1.0;
  Mat x(1, 1);
  x(0, 0) = 0.0;
  CHECK(net.evaluate(x)(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  x(0, 0) = -1.0;
  CHECK(net.evaluate(x)(0, 0) ==
        doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-12));
  x(0, 0) = 2.5;  // positive branch is identity
  CHECK(net.evaluate(x)(0, 0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("identity network reproduces its input") {
  DenseNet net({3, 3}, Activation::kIdentity, OutputHead::kDeterministic);
  net.weights()[0].value = Mat::Identity(3, 3);
  Mat x(3, 2);
  x << 1, -2, 0.5, 4, -0.25, 9;
  CHECK((net.evaluate(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dimension mismatch is rejected with a shape error") {
  DenseNet net({3, 2}, Activation::kElu, OutputHead::kDeterministic);
  CHECK_THROWS_AS(net.evaluate(Mat::Zero(4, 1)), std::invalid_argument);
}

TEST_CASE("linear derivative: loss = w * x with x = 3 gives dw = 3") {
  Param w("w", Mat::Constant(1, 1, 0.7));
  GradientTape tape;
  auto wp = tape.param(w);
  auto x = tape.input(Mat::Constant(1, 1, 3.0));
  auto loss = tape.sum(tape.matmul(wp, x));
  tape.backward(loss);
  CHECK(w.grad(0, 0) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("constant loss leaves untouched parameters at zero gradient") {
  Param w("w", Mat::Constant(1, 1, 0.7));
  GradientTape tape;
  (void)tape.param(w);  // touched but not on the loss path
  auto loss = tape.sum(tape.input(Mat::Constant(1, 1, 5.0)));
  tape.backward(loss);
  CHECK(w.grad(0, 0) == 0.0);
}

TEST_CASE("backward without a recorded forward errors") {
  GradientTape tape;
  CHECK_THROWS_AS(tape.backward(0), std::logic_error);
}

TEST_CASE("double backward on one tape errors") {
  GradientTape tape;
  auto loss = tape.sum(tape.input(Mat::Constant(1, 1, 1.0)));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("gradient check: [4,8,2] nets over 100 random inputs") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseNet net({4, 8, 2}, Activation::kElu, OutputHead::kDeterministic);
  net.init(rng);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mat x(4, 1);
    for (int i = 0; i < 4; ++i) x(i, 0) = normal(rng);
    worst = std::max(worst, max_gradient_rel_error(net, x, 1e-5));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient check holds for a gaussian-head net") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseNet net({5, 6, 3}, Activation::kElu, OutputHead::kGaussian);
  net.init(rng);
  Mat x(5, 2);
  for (Eigen::Index j = 0; j < 2; ++j)
    for (int i = 0; i < 5; ++i) x(i, j) = normal(rng);
  CHECK(max_gradient_rel_error(net, x, 1e-5) < 1e-4);
}

TEST_CASE("gaussian head: std strictly positive and clamped") {
  std::mt19937_64 rng(3);
  DenseNet net({2, 3}, Activation::kElu, OutputHead::kGaussian);
  net.init(rng);
  auto g = net.evaluate_gaussian(Mat::Zero(2, 1));
  CHECK((g.std.array() > 0.0).all());

  // Saturate the log-std rows: std must clamp to [1e-6, 1e3].
  net.biases()[0].value.block(3, 0, 3, 1).setConstant(1e9);
  g = net.evaluate_gaussian(Mat::Zero(2, 1));
  CHECK(g.std.maxCoeff() == doctest::Approx(1e3).epsilon(1e-12));
  net.biases()[0].value.block(3, 0, 3, 1).setConstant(-1e9);
  g = net.evaluate_gaussian(Mat::Zero(2, 1));
  CHECK(g.std.minCoeff() == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("forward is deterministic for fixed parameters") {
  std::mt19937_64 rng(11);
  DenseNet net({6, 8, 4}, Activation::kElu, OutputHead::kDeterministic);
  net.init(rng);
  Mat x = Mat::Random(6, 3);
  Mat a = net.evaluate(x);
  Mat b = net.evaluate(x);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
}

TEST_CASE("optimizer: zero gradient leaves parameters, bumps the counter") {
  Param w("w", Mat::Constant(2, 2, 1.5));
  OptimizerState opt(0.1);
  opt.step({&w});
  CHECK(opt.step_count() == 1);
  CHECK((w.value.array() == 1.5).all());
}

TEST_CASE("optimizer: one plain SGD step") {
  Param w("w", Mat::Zero(1, 1));
  w.grad(0, 0) = 1.0;
  OptimizerState opt(0.1, OptimizerMode::kSgd);
  opt.step({&w});
  CHECK(w.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("optimizer: two Adam steps on a fixed positive gradient decrease "
          "the parameter twice") {
  // Hand trace, lr = 0.1, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, grad = 1:
  //   step 1: m1_hat = m2_hat = 1 -> delta = -0.1 / (1 + 1e-8)
  //   step 2: identical bias-corrected moments -> same delta again.
  Param w("w", Mat::Zero(1, 1));
  OptimizerState opt(0.1);
  w.grad(0, 0) = 1.0;
  opt.step({&w});
  const double after1 = w.value(0, 0);
  CHECK(after1 == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  w.grad(0, 0) = 1.0;
  opt.step({&w});
  CHECK(w.value(0, 0) < after1);
  CHECK(after1 < 0.0);
  CHECK(w.value(0, 0) ==
        doctest::Approx(2.0 * (-0.1 / (1.0 + 1e-8))).epsilon(1e-9));
}

TEST_CASE("optimizer rejects non-finite gradients naming the parameter") {
  Param w("theta", Mat::Zero(1, 1));
  w.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  OptimizerState opt;
  CHECK_THROWS_WITH_AS(opt.step({&w}),
                       "optimizer_step: non-finite gradient in 'theta'",
                       std::runtime_error);
}

TEST_CASE("gradient norm clipping rescales to the cap") {
  Param w("w", Mat::Zero(1, 2));
  w.grad << 3.0, 4.0;  // norm 5
  const double norm = clip_grad_norm({&w}, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(w.grad.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("serialization round-trips bit-exactly through JSON") {
  std::mt19937_64 rng(99);
  DenseNet net({4, 5, 2}, Activation::kElu, OutputHead::kGaussian, "probe");
  net.init(rng);
  // Force full-precision doubles through a dump/parse cycle.
  std::stringstream ss;
  ss << net_to_json(net).dump();
  DenseNet copy = net_from_json(nlohmann::json::parse(ss.str()));
  Mat x = Mat::Random(4, 3);
  auto a = net.evaluate_gaussian(x);
  auto b = copy.evaluate_gaussian(x);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.std - b.std).cwiseAbs().maxCoeff() == 0.0);
  CHECK(copy.name() == "probe");
}

TEST_CASE("gaussian log-density is finite whenever std respects the floor") {
  std::mt19937_64 rng(5);
  DenseNet net({3, 4, 2}, Activation::kElu, OutputHead::kGaussian);
  net.init(rng);
  auto g = net.evaluate_gaussian(Mat::Random(3, 1));
  const double d = 2.0;
  const auto z = (Mat::Constant(2, 1, 1e6) - g.mean).array() / g.std.array();
  const double lp = -0.5 * z.square().sum() - g.std.array().log().sum() -
                    0.5 * d * std::log(2.0 * M_PI);
  CHECK(std::isfinite(lp));
}
