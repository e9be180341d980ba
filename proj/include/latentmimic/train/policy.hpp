#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "latentmimic/nn/dense_net.hpp"
#include "latentmimic/nn/optimizer.hpp"
#include "latentmimic/nn/serialize.hpp"
#include "latentmimic/prior/latent.hpp"

namespace lm::train {

using nn::Mat;
using nn::Vec;

inline constexpr double kLog2Pi = 1.8378770664093453;

// Gaussian policy over target joint angles plus a value head.
struct ActorCritic {
  nn::DenseNet actor;   // gaussian head, action_dim
  nn::DenseNet critic;  // scalar value

  ActorCritic() = default;

  ActorCritic(int obs_dim, int action_dim, const std::vector<int>& hidden,
              std::mt19937_64& rng) {
    std::vector<int> a = {obs_dim};
    a.insert(a.end(), hidden.begin(), hidden.end());
    a.push_back(action_dim);
    std::vector<int> c = {obs_dim};
    c.insert(c.end(), hidden.begin(), hidden.end());
    c.push_back(1);
    actor = nn::DenseNet(a, nn::Activation::kElu, nn::OutputHead::kGaussian,
                         "actor");
    critic = nn::DenseNet(c, nn::Activation::kElu,
                          nn::OutputHead::kDeterministic, "critic");
    actor.init(rng, 0.01);  // small initial action means
    critic.init(rng);
    // Moderate initial exploration noise instead of the head's std = 1 rad.
    auto& head_bias = actor.biases().back().value;
    head_bias.block(action_dim, 0, action_dim, 1).setConstant(std::log(0.3));
  }

  std::vector<nn::Param*> params() {
    auto p = actor.params();
    auto c = critic.params();
    p.insert(p.end(), c.begin(), c.end());
    return p;
  }

  nlohmann::json to_json() const {
    return {{"actor", nn::net_to_json(actor)},
            {"critic", nn::net_to_json(critic)}};
  }

  static ActorCritic from_json(const nlohmann::json& j) {
    ActorCritic ac;
    ac.actor = nn::net_from_json(j.at("actor"));
    ac.critic = nn::net_from_json(j.at("critic"));
    return ac;
  }
};

inline double diag_gaussian_log_prob(const Vec& action, const Vec& mean,
                                     const Vec& std) {
  const auto z = ((action - mean).array() / std.array());
  return -0.5 * z.square().sum() - std.array().log().sum() -
         0.5 * static_cast<double>(action.size()) * kLog2Pi;
}

// Batched policy evaluation; columns are observations.
struct PolicyEval {
  Mat mean;  // action_dim x B
  Mat std;
};

inline PolicyEval policy_eval(const ActorCritic& ac, const Mat& obs) {
  auto g = ac.actor.evaluate_gaussian(obs);
  return {std::move(g.mean), std::move(g.std)};
}

inline prior::LatentGaussian policy_distribution(const ActorCritic& ac,
                                                 const Vec& obs) {
  auto g = ac.actor.evaluate_gaussian(obs);
  return {g.mean.col(0), g.std.col(0)};
}

struct PpoConfig {
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 512;
  double gamma = 0.99;
  double lambda = 0.95;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.005;
  double max_grad_norm = 1.0;
};

struct PpoBatch {
  Mat observations;  // obs_dim x N
  Mat actions;       // action_dim x N
  Vec old_log_probs;
  Vec advantages;
  Vec returns;
};

struct PpoLosses {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
  int skipped = 0;  // updates dropped because of a non-finite loss
};

// Normalizes advantages in place (batch mean 0, std 1).
inline void normalize_advantages(Vec& adv) {
  const double mean = adv.mean();
  const double var =
      (adv.array() - mean).square().sum() / static_cast<double>(adv.size());
  const double std = std::sqrt(var);
  adv = (adv.array() - mean) / (std > 1e-12 ? std : 1.0);
}

// Clipped-surrogate PPO update with value MSE and entropy bonus; gradients
// are norm-clipped and applied by the shared optimizer.
inline PpoLosses ppo_update(ActorCritic& ac, nn::OptimizerState& opt,
                            PpoBatch batch, const PpoConfig& cfg,
                            std::mt19937_64& rng) {
  const int n = static_cast<int>(batch.observations.cols());
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
  normalize_advantages(batch.advantages);

  const int action_dim = static_cast<int>(batch.actions.rows());
  auto params = ac.params();
  PpoLosses losses;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int off = 0; off < n; off += cfg.minibatch) {
      const int b = std::min(cfg.minibatch, n - off);
      Mat obs(batch.observations.rows(), b);
      Mat act(action_dim, b);
      Mat old_lp(1, b), adv(1, b), ret(1, b);
      for (int j = 0; j < b; ++j) {
        const int k = order[off + j];
        obs.col(j) = batch.observations.col(k);
        act.col(j) = batch.actions.col(k);
        old_lp(0, j) = batch.old_log_probs(k);
        adv(0, j) = batch.advantages(k);
        ret(0, j) = batch.returns(k);
      }

      ac.actor.zero_grad();
      ac.critic.zero_grad();
      nn::GradientTape tape;
      auto obs_in = tape.input(obs);
      auto g = ac.actor.forward_gaussian(tape, obs_in);
      auto inv_std = tape.exp(tape.scale(g.log_std, -1.0));
      auto z = tape.mul(tape.sub(tape.input(act), g.mean), inv_std);
      auto log_prob = tape.add_scalar(
          tape.sub(tape.scale(tape.colwise_sum(tape.square(z)), -0.5),
                   tape.colwise_sum(g.log_std)),
          -0.5 * action_dim * kLog2Pi);
      auto ratio = tape.exp(tape.sub(log_prob, tape.input(old_lp)));
      auto adv_in = tape.input(adv);
      auto surrogate = tape.minimum(
          tape.mul(ratio, adv_in),
          tape.mul(tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_in));
      auto policy_loss = tape.scale(tape.mean(surrogate), -1.0);

      auto value = ac.critic.forward(tape, obs_in);
      auto value_loss = tape.mean(tape.square(tape.sub(value, tape.input(ret))));

      // Diagonal gaussian entropy: sum log std + d/2 (1 + ln 2pi).
      auto entropy = tape.add_scalar(tape.mean(tape.colwise_sum(g.log_std)),
                                     0.5 * action_dim * (1.0 + kLog2Pi));

      auto total = tape.add(
          tape.add(policy_loss, tape.scale(value_loss, cfg.value_coef)),
          tape.scale(entropy, -cfg.entropy_coef));

      const double loss_v = tape.value(total)(0, 0);
      if (!std::isfinite(loss_v)) {
        ++losses.skipped;
        continue;
      }
      tape.backward(total);
      nn::clip_grad_norm(params, cfg.max_grad_norm);
      opt.step(params);

      losses.policy_loss += tape.value(policy_loss)(0, 0);
      losses.value_loss += tape.value(value_loss)(0, 0);
      losses.entropy += tape.value(entropy)(0, 0);
      ++losses.minibatches;
    }
  }
  if (losses.minibatches > 0) {
    losses.policy_loss /= losses.minibatches;
    losses.value_loss /= losses.minibatches;
    losses.entropy /= losses.minibatches;
  }
  return losses;
}

}  // namespace lm::train
