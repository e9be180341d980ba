#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentmimic/prior/prior.hpp"
#include "latentmimic/rewards/rewards.hpp"
#include "latentmimic/sim/env.hpp"
#include "latentmimic/sim/heightfield.hpp"
#include "latentmimic/train/policy.hpp"

namespace lm {

namespace detail {

class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw std::runtime_error("config: " + path_ + " must be an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (j_.contains(key)) out = j_.at(key).get<T>();
  }

  bool has(const char* key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const nlohmann::json& sub(const char* key) {
    known_.insert(key);
    return j_.at(key);
  }

  ~StrictObject() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;  // already failing
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.count(it.key())) {
        throw std::runtime_error("config: unknown key '" + path_ + "." +
                                 it.key() + "'");
      }
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> known_;
};

}  // namespace detail

struct DatasetConfig {
  std::string path;  // optional; empty -> procedural gaits from `styles`
  std::vector<std::string> styles = {"trot", "pace"};
  double duration = 20.0;    // s per style
  double frame_rate = 50.0;  // Hz
};

struct PriorTrainConfig {
  prior::PriorConfig prior;
  int epochs = 60;
  int batch_size = 64;
};

struct RewardConfig {
  rewards::RewardWeights weights;
  bool reverse_mimic_kl = false;  // KL(z_target || z_sim) as written
  double mimic_coef = 1.0;        // stage-C mixing coefficients
  double task_coef = 1.0;
  double anchor_coef = 1.0;
};

struct AdaptationConfig {
  bool enabled = true;
  std::size_t capacity = 10000;
  int finetune_every = 10;  // PPO iterations
  int finetune_steps = 100;
  int finetune_batch = 64;
};

struct TrainerConfig {
  int num_envs = 16;
  int horizon = 256;
  train::PpoConfig ppo;
  // The ramp spans the style stage so the tolerance is fully open by the
  // time the policy must practice full traversals.
  rewards::ToleranceSchedule tolerance{0.5, 2.0 * M_PI, 300};
  std::vector<int> actor_hidden = {512, 256, 128};
  int style_iterations = 300;
  int terrain_iterations = 150;
  std::vector<std::string> terrain_kinds = {"flat", "stairs", "waves", "noise"};
  double traversal_time_budget = 30.0;  // s
  AdaptationConfig adaptation;
  int mixed_finetune_steps = 20;   // encoder fine-tune steps per iteration
  int mixed_finetune_batch = 64;
  bool per_episode_randomization = true;
};

struct EvalConfig {
  int trials_per_level = 16;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  DatasetConfig dataset;
  PriorTrainConfig prior;
  sim::EnvConfig env;
  RewardConfig rewards;
  TrainerConfig trainer;
  EvalConfig eval;
};

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"path", c.dataset.path},
                  {"styles", c.dataset.styles},
                  {"duration", c.dataset.duration},
                  {"frame_rate", c.dataset.frame_rate}};
  j["prior"] = {{"latent_dim", c.prior.prior.latent_dim},
                {"window_w", c.prior.prior.window_w},
                {"hidden", c.prior.prior.hidden},
                {"beta", c.prior.prior.beta},
                {"learning_rate", c.prior.prior.learning_rate},
                {"finetune_learning_rate", c.prior.prior.finetune_learning_rate},
                {"stop_kl", c.prior.prior.stop_kl},
                {"stop_consecutive", c.prior.prior.stop_consecutive},
                {"eval_interval", c.prior.prior.eval_interval},
                {"epochs", c.prior.epochs},
                {"batch_size", c.prior.batch_size}};
  j["env"] = {{"control_dt", c.env.control_dt},
              {"substeps", c.env.substeps},
              {"kp", c.env.kp},
              {"kd", c.env.kd},
              {"torque_limit", c.env.torque_limit},
              {"joint_inertia", c.env.joint_inertia},
              {"base_mass", c.env.base_mass},
              {"contact_stiffness", c.env.contact_stiffness},
              {"contact_damping", c.env.contact_damping},
              {"slip_velocity", c.env.slip_velocity},
              {"friction_viscous_cap", c.env.friction_viscous_cap},
              {"max_base_speed", c.env.max_base_speed},
              {"max_base_spin", c.env.max_base_spin},
              {"gravity", c.env.gravity},
              {"latency_substeps", c.env.latency_substeps},
              {"history_len", c.env.history_len},
              {"fall_height", c.env.fall_height},
              {"action_is_offset", c.env.action_is_offset}};
  j["rewards"] = {{"w_r", c.rewards.weights.w_r},
                  {"w_speed", c.rewards.weights.w_speed},
                  {"w_orientation", c.rewards.weights.w_orientation},
                  {"w_angular", c.rewards.weights.w_angular},
                  {"w_anchor", c.rewards.weights.w_anchor},
                  {"reverse_mimic_kl", c.rewards.reverse_mimic_kl},
                  {"mimic_coef", c.rewards.mimic_coef},
                  {"task_coef", c.rewards.task_coef},
                  {"anchor_coef", c.rewards.anchor_coef}};
  j["trainer"] = {{"num_envs", c.trainer.num_envs},
                  {"horizon", c.trainer.horizon},
                  {"clip", c.trainer.ppo.clip},
                  {"epochs", c.trainer.ppo.epochs},
                  {"minibatch", c.trainer.ppo.minibatch},
                  {"gamma", c.trainer.ppo.gamma},
                  {"lambda", c.trainer.ppo.lambda},
                  {"learning_rate", c.trainer.ppo.learning_rate},
                  {"value_coef", c.trainer.ppo.value_coef},
                  {"entropy_coef", c.trainer.ppo.entropy_coef},
                  {"max_grad_norm", c.trainer.ppo.max_grad_norm},
                  {"tolerance_start", c.trainer.tolerance.t_start},
                  {"tolerance_end", c.trainer.tolerance.t_end},
                  {"tolerance_ramp", c.trainer.tolerance.ramp_iterations},
                  {"actor_hidden", c.trainer.actor_hidden},
                  {"style_iterations", c.trainer.style_iterations},
                  {"terrain_iterations", c.trainer.terrain_iterations},
                  {"terrain_kinds", c.trainer.terrain_kinds},
                  {"traversal_time_budget", c.trainer.traversal_time_budget},
                  {"adaptation_enabled", c.trainer.adaptation.enabled},
                  {"adaptation_capacity", c.trainer.adaptation.capacity},
                  {"adaptation_finetune_every", c.trainer.adaptation.finetune_every},
                  {"adaptation_finetune_steps", c.trainer.adaptation.finetune_steps},
                  {"adaptation_finetune_batch", c.trainer.adaptation.finetune_batch},
                  {"mixed_finetune_steps", c.trainer.mixed_finetune_steps},
                  {"mixed_finetune_batch", c.trainer.mixed_finetune_batch},
                  {"per_episode_randomization", c.trainer.per_episode_randomization}};
  j["eval"] = {{"trials_per_level", c.eval.trials_per_level}};
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::StrictObject root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  if (root.has("dataset")) {
    detail::StrictObject d(root.sub("dataset"), "dataset");
    d.get("path", c.dataset.path);
    d.get("styles", c.dataset.styles);
    d.get("duration", c.dataset.duration);
    d.get("frame_rate", c.dataset.frame_rate);
  }
  if (root.has("prior")) {
    detail::StrictObject p(root.sub("prior"), "prior");
    p.get("latent_dim", c.prior.prior.latent_dim);
    p.get("window_w", c.prior.prior.window_w);
    p.get("hidden", c.prior.prior.hidden);
    p.get("beta", c.prior.prior.beta);
    p.get("learning_rate", c.prior.prior.learning_rate);
    p.get("finetune_learning_rate", c.prior.prior.finetune_learning_rate);
    p.get("stop_kl", c.prior.prior.stop_kl);
    p.get("stop_consecutive", c.prior.prior.stop_consecutive);
    p.get("eval_interval", c.prior.prior.eval_interval);
    p.get("epochs", c.prior.epochs);
    p.get("batch_size", c.prior.batch_size);
  }
  if (root.has("env")) {
    detail::StrictObject e(root.sub("env"), "env");
    e.get("control_dt", c.env.control_dt);
    e.get("substeps", c.env.substeps);
    e.get("kp", c.env.kp);
    e.get("kd", c.env.kd);
    e.get("torque_limit", c.env.torque_limit);
    e.get("joint_inertia", c.env.joint_inertia);
    e.get("base_mass", c.env.base_mass);
    e.get("contact_stiffness", c.env.contact_stiffness);
    e.get("contact_damping", c.env.contact_damping);
    e.get("slip_velocity", c.env.slip_velocity);
    e.get("friction_viscous_cap", c.env.friction_viscous_cap);
    e.get("max_base_speed", c.env.max_base_speed);
    e.get("max_base_spin", c.env.max_base_spin);
    e.get("gravity", c.env.gravity);
    e.get("latency_substeps", c.env.latency_substeps);
    e.get("history_len", c.env.history_len);
    e.get("fall_height", c.env.fall_height);
    e.get("action_is_offset", c.env.action_is_offset);
  }
  if (root.has("rewards")) {
    detail::StrictObject r(root.sub("rewards"), "rewards");
    r.get("w_r", c.rewards.weights.w_r);
    r.get("w_speed", c.rewards.weights.w_speed);
    r.get("w_orientation", c.rewards.weights.w_orientation);
    r.get("w_angular", c.rewards.weights.w_angular);
    r.get("w_anchor", c.rewards.weights.w_anchor);
    r.get("reverse_mimic_kl", c.rewards.reverse_mimic_kl);
    r.get("mimic_coef", c.rewards.mimic_coef);
    r.get("task_coef", c.rewards.task_coef);
    r.get("anchor_coef", c.rewards.anchor_coef);
  }
  if (root.has("trainer")) {
    detail::StrictObject t(root.sub("trainer"), "trainer");
    t.get("num_envs", c.trainer.num_envs);
    t.get("horizon", c.trainer.horizon);
    t.get("clip", c.trainer.ppo.clip);
    t.get("epochs", c.trainer.ppo.epochs);
    t.get("minibatch", c.trainer.ppo.minibatch);
    t.get("gamma", c.trainer.ppo.gamma);
    t.get("lambda", c.trainer.ppo.lambda);
    t.get("learning_rate", c.trainer.ppo.learning_rate);
    t.get("value_coef", c.trainer.ppo.value_coef);
    t.get("entropy_coef", c.trainer.ppo.entropy_coef);
    t.get("max_grad_norm", c.trainer.ppo.max_grad_norm);
    t.get("tolerance_start", c.trainer.tolerance.t_start);
    t.get("tolerance_end", c.trainer.tolerance.t_end);
    t.get("tolerance_ramp", c.trainer.tolerance.ramp_iterations);
    t.get("actor_hidden", c.trainer.actor_hidden);
    t.get("style_iterations", c.trainer.style_iterations);
    t.get("terrain_iterations", c.trainer.terrain_iterations);
    t.get("terrain_kinds", c.trainer.terrain_kinds);
    t.get("traversal_time_budget", c.trainer.traversal_time_budget);
    t.get("adaptation_enabled", c.trainer.adaptation.enabled);
    t.get("adaptation_capacity", c.trainer.adaptation.capacity);
    t.get("adaptation_finetune_every", c.trainer.adaptation.finetune_every);
    t.get("adaptation_finetune_steps", c.trainer.adaptation.finetune_steps);
    t.get("adaptation_finetune_batch", c.trainer.adaptation.finetune_batch);
    t.get("mixed_finetune_steps", c.trainer.mixed_finetune_steps);
    t.get("mixed_finetune_batch", c.trainer.mixed_finetune_batch);
    t.get("per_episode_randomization", c.trainer.per_episode_randomization);
  }
  if (root.has("eval")) {
    detail::StrictObject e(root.sub("eval"), "eval");
    e.get("trials_per_level", c.eval.trials_per_level);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

// FNV-1a over the serialized config, recorded in checkpoints.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lm
