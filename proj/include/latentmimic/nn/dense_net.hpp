#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentmimic/nn/tape.hpp"

namespace lm::nn {

enum class Activation { kElu, kIdentity };
enum class OutputHead { kDeterministic, kGaussian };

inline constexpr double kLogStdFloor = -13.815510557964274;  // ln(1e-6)
inline constexpr double kLogStdCeil = 6.907755278982137;     // ln(1e3)

// Output of a gaussian-head forward: diagonal gaussian per batch column.
struct GaussianValue {
  Mat mean;  // d x B
  Mat std;   // d x B, strictly positive
};

struct GaussianNodes {
  GradientTape::Ref mean;
  GradientTape::Ref log_std;  // already clamped to [ln 1e-6, ln 1e3]
};

// Fully connected net. layer_sizes = [in, hidden..., out]; a gaussian head
// doubles the final linear layer internally (mean rows then log-std rows).
class DenseNet {
 public:
  DenseNet() = default;

  DenseNet(std::vector<int> layer_sizes, Activation act, OutputHead head,
           std::string name = "net")
      : layer_sizes_(std::move(layer_sizes)), activation_(act), head_(head),
        name_(std::move(name)) {
    if (layer_sizes_.size() < 2) {
      throw std::invalid_argument("DenseNet: need at least input and output");
    }
    for (int s : layer_sizes_) {
      if (s <= 0) throw std::invalid_argument("DenseNet: layer sizes must be positive");
    }
    const int n_layers = static_cast<int>(layer_sizes_.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
      int in = layer_sizes_[l];
      int out = layer_sizes_[l + 1];
      if (l == n_layers - 1 && head_ == OutputHead::kGaussian) out *= 2;
      weights_.emplace_back(name_ + ".W" + std::to_string(l), Mat::Zero(out, in));
      biases_.emplace_back(name_ + ".b" + std::to_string(l), Mat::Zero(out, 1));
    }
  }

  // Orthogonal-ish init: QR of a gaussian matrix, gain sqrt(2) on hidden
  // layers, out_gain on the final one. Biases stay zero.
  void init(std::mt19937_64& rng, double out_gain = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Mat& w = weights_[l].value;
      Mat a(w.rows(), w.cols());
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
      // QR on the tall orientation, then transpose back if needed.
      bool transposed = a.rows() < a.cols();
      Mat t = transposed ? Mat(a.transpose()) : a;
      Eigen::HouseholderQR<Mat> qr(t);
      Mat q = qr.householderQ() * Mat::Identity(t.rows(), t.cols());
      // Fix signs so the decomposition is unique-ish.
      Mat r = qr.matrixQR().topRows(t.cols()).triangularView<Eigen::Upper>();
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
      Mat o = transposed ? Mat(q.transpose()) : q;
      double gain = (l + 1 == weights_.size()) ? out_gain : std::sqrt(2.0);
      w = gain * o;
      biases_[l].value.setZero();
    }
  }

  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Activation activation() const { return activation_; }
  OutputHead head() const { return head_; }
  const std::string& name() const { return name_; }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& w : weights_) out.push_back(&w);
    for (auto& b : biases_) out.push_back(&b);
    return out;
  }

  void zero_grad() {
    for (auto& w : weights_) w.zero_grad();
    for (auto& b : biases_) b.zero_grad();
  }

  // --- plain (tape-free) evaluation --------------------------------------

  Mat evaluate(const Mat& input) const {
    check_input(input);
    Mat h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = (weights_[l].value * h).colwise() + biases_[l].value.col(0);
      if (l + 1 < weights_.size()) h = activate(h);
    }
    return h;
  }

  GaussianValue evaluate_gaussian(const Mat& input) const {
    if (head_ != OutputHead::kGaussian) {
      throw std::logic_error(name_ + ": not a gaussian head");
    }
    Mat out = evaluate(input);
    const int d = output_size();
    GaussianValue g;
    g.mean = out.topRows(d);
    g.std = out.bottomRows(d)
                .array().max(kLogStdFloor).min(kLogStdCeil).exp();
    return g;
  }

  // --- recorded evaluation ------------------------------------------------

  GradientTape::Ref forward(GradientTape& tape, GradientTape::Ref input) {
    check_input(tape.value(input));
    auto h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      auto w = tape.param(weights_[l]);
      auto b = tape.param(biases_[l]);
      h = tape.add_bias(tape.matmul(w, h), b);
      if (l + 1 < weights_.size() && activation_ == Activation::kElu) {
        h = tape.elu(h);
      }
    }
    return h;
  }

  GaussianNodes forward_gaussian(GradientTape& tape, GradientTape::Ref input) {
    if (head_ != OutputHead::kGaussian) {
      throw std::logic_error(name_ + ": not a gaussian head");
    }
    auto out = forward(tape, input);
    const int d = output_size();
    GaussianNodes g;
    g.mean = tape.slice_rows(out, 0, d);
    g.log_std = tape.clamp(tape.slice_rows(out, d, d), kLogStdFloor, kLogStdCeil);
    return g;
  }

  std::vector<Param>& weights() { return weights_; }
  std::vector<Param>& biases() { return biases_; }
  const std::vector<Param>& weights() const { return weights_; }
  const std::vector<Param>& biases() const { return biases_; }

 private:
  void check_input(const Mat& input) const {
    if (input.rows() != input_size()) {
      throw std::invalid_argument(name_ + ": input has " +
                                  std::to_string(input.rows()) +
                                  " rows, expected " +
                                  std::to_string(input_size()));
    }
  }

  Mat activate(const Mat& x) const {
    if (activation_ == Activation::kIdentity) return x;
    return x.unaryExpr([](double v) { return v > 0.0 ? v : std::exp(v) - 1.0; });
  }

  std::vector<int> layer_sizes_;
  Activation activation_ = Activation::kElu;
  OutputHead head_ = OutputHead::kDeterministic;
  std::string name_;
  std::vector<Param> weights_;
  std::vector<Param> biases_;
};

}  // namespace lm::nn
