#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/rewards/rewards.hpp"
#include "latentmimic/sim/env.hpp"
#include "latentmimic/train/adaptation_buffer.hpp"
#include "latentmimic/train/curriculum.hpp"
#include "latentmimic/train/gae.hpp"
#include "latentmimic/train/policy.hpp"
#include "latentmimic/train/rollout.hpp"

namespace lm::train {

enum class Stage { kImitation, kAdaptation };

struct RewardBreakdown {
  double mimic = 0.0;
  double task = 0.0;
  double anchor = 0.0;
  double total = 0.0;
};

struct Transition {
  Vec observation;
  Vec action;
  double log_prob = 0.0;
  double value = 0.0;
  RewardBreakdown reward;
  bool done = false;
  Vec next_observation;
  sim::TerrainKind terrain_kind = sim::TerrainKind::kFlat;
  int terrain_level = 1;
  Vec sim_window;       // flat canonical window before the step
  Vec next_sim_window;  // after the step
};

struct RolloutStats {
  double mean_mimic = 0.0;
  double mean_task = 0.0;
  double mean_anchor = 0.0;
  double mean_total = 0.0;
  double mean_episode_length = 0.0;  // completed episodes; running if none
  int episodes_completed = 0;
  int traversals = 0;
};

struct IterationLog {
  int iteration = 0;
  RolloutStats rollout;
  PpoLosses losses;
  double tolerance_threshold = 0.0;
  std::vector<double> per_terrain_mean_level;  // aligned with terrain kinds
  std::size_t adaptation_buffer_size = 0;
};

// Two-stage trainer: stage B learns a style policy on flat terrain from the
// mimic reward alone; stage C adds task + anchor terms over the terrain mix,
// advances the per-environment curriculum, and feeds the adaptation buffer.
class Trainer {
 public:
  Trainer(RunConfig cfg, prior::LatentPrior prior, Stage stage,
          ActorCritic policy, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        prior_(std::move(prior)),
        stage_(stage),
        policy_(std::move(policy)),
        opt_(cfg_.trainer.ppo.learning_rate),
        adaptation_(cfg_.trainer.adaptation.capacity),
        curriculum_(cfg_.trainer.num_envs, 1),
        rng_(seed) {
    if (cfg_.dataset.styles.empty()) {
      throw std::invalid_argument("Trainer: no styles configured");
    }
    style_ = make_style_reference(
        motion::gait_style_from_name(cfg_.dataset.styles.front()),
        cfg_.dataset.duration, cfg_.dataset.frame_rate);
    if (static_cast<int>(style_.frames.size()) < prior_.window_w() + 2) {
      throw std::invalid_argument("Trainer: style reference too short");
    }
    seed_mocap_windows();

    terrain_kinds_.reserve(cfg_.trainer.terrain_kinds.size());
    for (const auto& name : cfg_.trainer.terrain_kinds) {
      terrain_kinds_.push_back(sim::terrain_kind_from_name(name));
    }
    if (terrain_kinds_.empty()) terrain_kinds_.push_back(sim::TerrainKind::kFlat);

    max_episode_steps_ = static_cast<int>(
        std::llround(cfg_.trainer.traversal_time_budget / cfg_.env.control_dt));

    contexts_.resize(cfg_.trainer.num_envs);
    for (int i = 0; i < cfg_.trainer.num_envs; ++i) {
      contexts_[i].env = sim::QuadrupedEnv(cfg_.env);
      contexts_[i].kind = stage_ == Stage::kImitation
                              ? sim::TerrainKind::kFlat
                              : terrain_kinds_[i % terrain_kinds_.size()];
      reset_env(i);
    }
  }

  // Frozen end-of-stage-B policy used by the anchor reward in stage C.
  void set_anchor_policy(ActorCritic anchor) {
    anchor_ = std::move(anchor);
    has_anchor_ = true;
  }

  const ActorCritic& policy() const { return policy_; }
  ActorCritic& policy() { return policy_; }
  const prior::LatentPrior& prior() const { return prior_; }
  const CurriculumState& curriculum() const { return curriculum_; }
  const AdaptationBuffer& adaptation_buffer() const { return adaptation_; }
  int iteration() const { return iteration_; }
  const std::vector<sim::TerrainKind>& terrain_kinds() const {
    return terrain_kinds_;
  }

  // One PPO iteration: collect `horizon` steps in every environment, update
  // the policy, fine-tune the encoder on mixed batches and (stage C) the
  // predictor from the adaptation buffer.
  IterationLog run_iteration() {
    IterationLog log;
    log.iteration = iteration_;
    log.tolerance_threshold =
        rewards::current_threshold(cfg_.trainer.tolerance, iteration_);

    std::vector<std::vector<Transition>> per_env(contexts_.size());
    log.rollout = collect_rollouts(cfg_.trainer.horizon, per_env);

    log.losses = ppo_update_from(per_env);

    for (const auto& seq : per_env) {
      for (const auto& t : seq) {
        mixed_.push_simulated(t.sim_window);
      }
    }
    const int enc_steps =
        prior_.finetune_mixed(mixed_, cfg_.trainer.mixed_finetune_steps,
                              cfg_.trainer.mixed_finetune_batch, rng_);
    // Encoder drift breaks predict(encode(.)) unless the predictor follows:
    // re-fit it on mocap pairs for as many steps as the encoder moved.
    for (int s = 0; s < enc_steps && mocap_pairs_w_.cols() > 0; ++s) {
      const int bs = std::min<int>(cfg_.trainer.mixed_finetune_batch,
                                   static_cast<int>(mocap_pairs_w_.cols()));
      Mat w(mocap_pairs_w_.rows(), bs), nw(mocap_pairs_w_.rows(), bs);
      std::uniform_int_distribution<int> pick(
          0, static_cast<int>(mocap_pairs_w_.cols()) - 1);
      for (int b = 0; b < bs; ++b) {
        const int idx = pick(rng_);
        w.col(b) = mocap_pairs_w_.col(idx);
        nw.col(b) = mocap_pairs_next_.col(idx);
      }
      prior_.finetune_predictor_step(w, nw);
    }

    if (stage_ == Stage::kAdaptation && cfg_.trainer.adaptation.enabled) {
      std::vector<AdaptationBuffer::Entry> batch;
      for (const auto& seq : per_env) {
        for (const auto& t : seq) {
          if (t.done) continue;  // next window spans a reset boundary
          batch.push_back({t.sim_window, t.next_sim_window, t.reward.total});
        }
      }
      adaptation_.insert(std::move(batch));
      const auto& ad = cfg_.trainer.adaptation;
      if (!adaptation_.empty() && ad.finetune_every > 0 &&
          (iteration_ + 1) % ad.finetune_every == 0) {
        for (int s = 0; s < ad.finetune_steps; ++s) {
          auto [w, nw] = adaptation_.sample(rng_, ad.finetune_batch);
          prior_.finetune_predictor_step(w, nw);
        }
      }
    }
    log.adaptation_buffer_size = adaptation_.size();
    log.per_terrain_mean_level = per_terrain_mean_level();

    curriculum_advance_iteration(curriculum_);
    ++iteration_;
    return log;
  }

  std::vector<IterationLog> train(int iterations,
                                  std::ostream* metrics = nullptr) {
    if (metrics) write_metrics_header(*metrics);
    std::vector<IterationLog> logs;
    logs.reserve(iterations);
    for (int i = 0; i < iterations; ++i) {
      logs.push_back(run_iteration());
      if (metrics) write_metrics_row(*metrics, logs.back());
    }
    return logs;
  }

  // Rollout statistics of an arbitrary policy without updating anything;
  // used for baselines. `tolerance_iteration` >= 0 pins the termination
  // threshold instead of the trainer's own schedule position.
  RolloutStats evaluate_policy(const ActorCritic& probe, int horizon,
                               int tolerance_iteration = -1) {
    // Copy first: the probe may alias this trainer's own policy.
    ActorCritic probe_copy = probe;
    ActorCritic saved = std::move(policy_);
    policy_ = std::move(probe_copy);
    tolerance_override_ = tolerance_iteration;
    // Deterministic evaluation: mean actions, fixed RNG stream for terrain
    // and randomization draws, training RNG position untouched.
    eval_mean_actions_ = true;
    std::mt19937_64 saved_rng = rng_;
    rng_.seed(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
    for (std::size_t i = 0; i < contexts_.size(); ++i) reset_env(static_cast<int>(i));
    std::vector<std::vector<Transition>> per_env(contexts_.size());
    RolloutStats stats = collect_rollouts(horizon, per_env);
    eval_mean_actions_ = false;
    tolerance_override_ = -1;
    policy_ = std::move(saved);
    rng_ = saved_rng;
    for (std::size_t i = 0; i < contexts_.size(); ++i) reset_env(static_cast<int>(i));
    return stats;
  }

  void write_metrics_header(std::ostream& out) const {
    out << "iteration,mimic_reward,task_reward,anchor_reward,total_reward,"
           "episode_length,tolerance_threshold";
    for (auto k : terrain_kinds_) out << ",level_" << sim::terrain_kind_name(k);
    out << ",buffer_size\n";
  }

  void write_metrics_row(std::ostream& out, const IterationLog& log) const {
    out << log.iteration << ',' << log.rollout.mean_mimic << ','
        << log.rollout.mean_task << ',' << log.rollout.mean_anchor << ','
        << log.rollout.mean_total << ',' << log.rollout.mean_episode_length
        << ',' << log.tolerance_threshold;
    for (double lvl : log.per_terrain_mean_level) out << ',' << lvl;
    out << ',' << log.adaptation_buffer_size << '\n';
  }

  // Collects `horizon` control steps per environment. Episodes persist
  // across calls; horizon truncation bootstraps instead of terminating.
  RolloutStats collect_rollouts(int horizon,
                                std::vector<std::vector<Transition>>& per_env) {
    const int n_envs = static_cast<int>(contexts_.size());
    per_env.assign(n_envs, {});
    RolloutStats stats;
    double reward_steps = 0.0;
    double episode_length_sum = 0.0;
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int t = 0; t < horizon; ++t) {
      Mat obs(obs_dim(), n_envs);
      for (int i = 0; i < n_envs; ++i) {
        auto& c = contexts_[i];
        c.pipeline.refresh_target();
        c.observation = c.env.assemble_observation(c.pipeline.z_target.mean);
        obs.col(i) = c.observation;
      }
      auto pe = policy_eval(policy_, obs);
      Mat values = policy_.critic.evaluate(obs);

      for (int i = 0; i < n_envs; ++i) {
        auto& c = contexts_[i];
        Transition tr;
        tr.observation = c.observation;
        tr.value = values(0, i);
        tr.terrain_kind = c.kind;
        tr.terrain_level = curriculum_.levels[i];
        tr.sim_window = flat_canonical_window(c.pipeline.window);

        Vec action(pe.mean.rows());
        for (Eigen::Index k = 0; k < action.size(); ++k) {
          action(k) = eval_mean_actions_
                          ? pe.mean(k, i)
                          : pe.mean(k, i) + pe.std(k, i) * gauss(rng_);
        }
        tr.action = action;
        tr.log_prob =
            diag_gaussian_log_prob(action, pe.mean.col(i), pe.std.col(i));

        const Vec target_q = c.pipeline.target_q;
        const prior::LatentGaussian z_target = c.pipeline.z_target;
        c.env.step(action);
        ++c.episode_steps;
        c.pipeline.push_frame(c.env.current_frame());
        tr.next_sim_window = flat_canonical_window(c.pipeline.window);

        tr.reward = compute_reward(c, z_target, tr.observation);
        stats.mean_mimic += tr.reward.mimic;
        stats.mean_task += tr.reward.task;
        stats.mean_anchor += tr.reward.anchor;
        stats.mean_total += tr.reward.total;
        reward_steps += 1.0;

        const auto& st = c.env.state();
        const double e_joint = rewards::joint_error(st.q, target_q);
        const bool fell = c.env.fallen() || c.env.faulted();
        const bool off_track = rewards::should_terminate(
            e_joint, cfg_.trainer.tolerance,
            tolerance_override_ >= 0 ? tolerance_override_ : iteration_);
        const bool traversed = st.p.x() >= sim::kTileSize;
        const bool out_of_time = c.episode_steps >= max_episode_steps_;
        if (fell || off_track || traversed || out_of_time) {
          tr.done = true;
          ++stats.episodes_completed;
          episode_length_sum += c.episode_steps;
          if (traversed) ++stats.traversals;
          curriculum_update(curriculum_,
                            {{i, curriculum_.levels[i], traversed}});
          reset_env(i);
        }
        c.pipeline.refresh_target();
        tr.next_observation =
            c.env.assemble_observation(c.pipeline.z_target.mean);
        per_env[i].push_back(std::move(tr));
      }
    }

    if (reward_steps > 0.0) {
      stats.mean_mimic /= reward_steps;
      stats.mean_task /= reward_steps;
      stats.mean_anchor /= reward_steps;
      stats.mean_total /= reward_steps;
    }
    stats.mean_episode_length =
        stats.episodes_completed > 0
            ? episode_length_sum / stats.episodes_completed
            : mean_running_episode_length();
    return stats;
  }

 private:
  struct EnvContext {
    sim::QuadrupedEnv env;
    MimicPipeline pipeline;
    sim::TerrainKind kind = sim::TerrainKind::kFlat;
    int episode_steps = 0;
    Vec observation;
  };

  int obs_dim() const {
    return sim::observation_dim(cfg_.env.history_len, prior_.latent_dim());
  }

  void seed_mocap_windows() {
    const int count = prior_.window_w() + 1;
    std::vector<Vec> windows;
    for (std::size_t s = 0; s + count <= style_.frames.size(); ++s) {
      windows.push_back(flat_canonical_window(style_.frames, s, count));
      mixed_.push_mocap(windows.back());
    }
    // Consecutive (window, next window) pairs keep the predictor aligned
    // with the encoder while the encoder adapts to simulated data.
    const std::size_t pairs = windows.empty() ? 0 : windows.size() - 1;
    mocap_pairs_w_.resize(windows.empty() ? 0 : windows[0].size(),
                          static_cast<Eigen::Index>(pairs));
    mocap_pairs_next_.resizeLike(mocap_pairs_w_);
    for (std::size_t s = 0; s < pairs; ++s) {
      mocap_pairs_w_.col(static_cast<Eigen::Index>(s)) = windows[s];
      mocap_pairs_next_.col(static_cast<Eigen::Index>(s)) = windows[s + 1];
    }
  }

  void reset_env(int i) {
    auto& c = contexts_[i];
    const int level =
        c.kind == sim::TerrainKind::kFlat ? 1 : curriculum_.levels[i];
    auto terrain = sim::build_terrain(c.kind, level, rng_());
    sim::DomainRandomization rand;
    if (cfg_.trainer.per_episode_randomization) rand = sim::randomize(rng_());

    c.env.reset(terrain, rand, style_.seed_state_frame(prior_.window_w()));
    c.pipeline.reset(prior_, style_.frames);
    c.episode_steps = 0;
  }

  RewardBreakdown compute_reward(const EnvContext& c,
                                 const prior::LatentGaussian& z_target,
                                 const Vec& observation) {
    RewardBreakdown r;
    r.mimic = rewards::mimic_reward(z_target, c.pipeline.z_sim,
                                    cfg_.rewards.weights.w_r,
                                    cfg_.rewards.reverse_mimic_kl);
    if (stage_ == Stage::kImitation) {
      r.total = cfg_.rewards.mimic_coef * r.mimic;
      return r;
    }
    const auto& st = c.env.state();
    r.task = rewards::task_reward(st.v.x(), style_.spec.base_speed,
                                  c.env.projected_gravity(), st.v.tail<3>(),
                                  cfg_.rewards.weights);
    if (has_anchor_ && cfg_.rewards.weights.w_anchor != 0.0) {
      r.anchor = rewards::anchor_reward(
          policy_distribution(policy_, observation),
          policy_distribution(anchor_, observation),
          cfg_.rewards.weights.w_anchor);
    }
    r.total = cfg_.rewards.mimic_coef * r.mimic +
              cfg_.rewards.task_coef * r.task +
              cfg_.rewards.anchor_coef * r.anchor;
    return r;
  }

  PpoLosses ppo_update_from(const std::vector<std::vector<Transition>>& per_env) {
    int total = 0;
    for (const auto& seq : per_env) total += static_cast<int>(seq.size());
    if (total == 0) throw std::logic_error("Trainer: empty rollout");

    PpoBatch batch;
    batch.observations.resize(obs_dim(), total);
    batch.actions.resize(motion::kNumJoints, total);
    batch.old_log_probs.resize(total);
    batch.advantages.resize(total);
    batch.returns.resize(total);

    int col = 0;
    for (const auto& seq : per_env) {
      const int n = static_cast<int>(seq.size());
      if (n == 0) continue;
      Vec rewards(n), values(n);
      std::vector<bool> dones(n);
      for (int t = 0; t < n; ++t) {
        rewards(t) = seq[t].reward.total;
        values(t) = seq[t].value;
        dones[t] = seq[t].done;
      }
      double bootstrap = 0.0;
      if (!seq.back().done) {
        bootstrap = policy_.critic.evaluate(seq.back().next_observation)(0, 0);
      }
      auto gae = compute_gae(rewards, values, dones, bootstrap,
                             cfg_.trainer.ppo.gamma, cfg_.trainer.ppo.lambda);
      for (int t = 0; t < n; ++t) {
        batch.observations.col(col) = seq[t].observation;
        batch.actions.col(col) = seq[t].action;
        batch.old_log_probs(col) = seq[t].log_prob;
        batch.advantages(col) = gae.advantages(t);
        batch.returns(col) = gae.returns(t);
        ++col;
      }
    }
    return ppo_update(policy_, opt_, std::move(batch), cfg_.trainer.ppo, rng_);
  }

  std::vector<double> per_terrain_mean_level() const {
    std::vector<double> sum(terrain_kinds_.size(), 0.0);
    std::vector<int> count(terrain_kinds_.size(), 0);
    for (std::size_t i = 0; i < contexts_.size(); ++i) {
      for (std::size_t k = 0; k < terrain_kinds_.size(); ++k) {
        if (contexts_[i].kind == terrain_kinds_[k]) {
          sum[k] += curriculum_.levels[i];
          ++count[k];
          break;
        }
      }
    }
    for (std::size_t k = 0; k < sum.size(); ++k) {
      if (count[k] > 0) sum[k] /= count[k];
    }
    return sum;
  }

  double mean_running_episode_length() const {
    double s = 0.0;
    for (const auto& c : contexts_) s += c.episode_steps;
    return contexts_.empty() ? 0.0 : s / static_cast<double>(contexts_.size());
  }

  RunConfig cfg_;
  prior::LatentPrior prior_;
  Stage stage_;
  ActorCritic policy_;
  ActorCritic anchor_;
  bool has_anchor_ = false;
  nn::OptimizerState opt_;
  StyleReference style_;
  prior::MixedReplayBuffer mixed_;
  Mat mocap_pairs_w_;
  Mat mocap_pairs_next_;
  AdaptationBuffer adaptation_;
  CurriculumState curriculum_;
  std::vector<sim::TerrainKind> terrain_kinds_;
  std::vector<EnvContext> contexts_;
  int max_episode_steps_ = 1500;
  int iteration_ = 0;
  int tolerance_override_ = -1;
  bool eval_mean_actions_ = false;
  std::mt19937_64 rng_;
};

}  // namespace lm::train
