#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "latentmimic/nn/tape.hpp"

namespace lm::nn {

enum class OptimizerMode { kSgd, kAdam };

// Adam (default) or plain SGD over a fixed parameter set. Moments are keyed
// by parameter identity and created lazily with matching shapes.
class OptimizerState {
 public:
  explicit OptimizerState(double lr = 3e-4,
                          OptimizerMode mode = OptimizerMode::kAdam,
                          double beta1 = 0.9, double beta2 = 0.999,
                          double eps = 1e-8)
      : lr_(lr), mode_(mode), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  std::int64_t step_count() const { return step_count_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  // Applies one update from the gradients stored in the params. Any
  // non-finite gradient rejects the whole step before mutating anything.
  void step(const std::vector<Param*>& params) {
    for (Param* p : params) {
      if (!p->grad.allFinite()) {
        throw std::runtime_error("optimizer_step: non-finite gradient in '" +
                                 p->name + "'");
      }
      if (p->grad.rows() != p->value.rows() ||
          p->grad.cols() != p->value.cols()) {
        throw std::invalid_argument("optimizer_step: gradient shape mismatch in '" +
                                    p->name + "'");
      }
    }
    ++step_count_;
    if (mode_ == OptimizerMode::kSgd) {
      for (Param* p : params) p->value -= lr_ * p->grad;
      return;
    }
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (Param* p : params) {
      Moments& m = moments_[p];
      if (m.m1.size() == 0) {
        m.m1 = Mat::Zero(p->value.rows(), p->value.cols());
        m.m2 = Mat::Zero(p->value.rows(), p->value.cols());
      }
      m.m1 = beta1_ * m.m1 + (1.0 - beta1_) * p->grad;
      m.m2 = beta2_ * m.m2 + (1.0 - beta2_) * p->grad.array().square().matrix();
      Mat m1_hat = m.m1 / bc1;
      Mat m2_hat = m.m2 / bc2;
      p->value.array() -=
          lr_ * m1_hat.array() / (m2_hat.array().sqrt() + eps_);
    }
  }

 private:
  struct Moments {
    Mat m1, m2;
  };

  double lr_;
  OptimizerMode mode_;
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::unordered_map<const Param*, Moments> moments_;
};

// Global gradient-norm clipping across a parameter set.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (Param* p : const_cast<std::vector<Param*>&>(params)) p->grad *= s;
  }
  return norm;
}

}  // namespace lm::nn
