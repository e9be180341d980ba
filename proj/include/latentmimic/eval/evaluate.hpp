#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/motion/dataset.hpp"
#include "latentmimic/sim/env.hpp"
#include "latentmimic/train/policy.hpp"
#include "latentmimic/train/rollout.hpp"

namespace lm::eval {

struct TrackingMse {
  double base_position = 0.0;   // m^2
  double joint_angle = 0.0;     // rad^2
  double joint_velocity = 0.0;  // (rad/s)^2
};

// Mean squared tracking errors. Base position is the squared 3-D offset
// averaged over steps; joint metrics average over steps and joints.
inline TrackingMse tracking_mse(const std::vector<motion::MotionFrame>& sim,
                                const std::vector<motion::MotionFrame>& ref) {
  if (sim.size() != ref.size()) {
    throw std::invalid_argument(
        "tracking_mse: length mismatch (sim " + std::to_string(sim.size()) +
        ", reference " + std::to_string(ref.size()) + ")");
  }
  if (sim.empty()) throw std::invalid_argument("tracking_mse: empty");
  TrackingMse out;
  const double steps = static_cast<double>(sim.size());
  const double joints = static_cast<double>(sim.front().q.size());
  for (std::size_t t = 0; t < sim.size(); ++t) {
    out.base_position += (sim[t].p - ref[t].p).squaredNorm();
    out.joint_angle += (sim[t].q - ref[t].q).squaredNorm() / joints;
    out.joint_velocity += (sim[t].q_dot - ref[t].q_dot).squaredNorm() / joints;
  }
  out.base_position /= steps;
  out.joint_angle /= steps;
  out.joint_velocity /= steps;
  return out;
}

inline int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("LM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::min(n, std::max(1, jobs));
}

struct EpisodeOutcome {
  bool traversed = false;
  bool fell = false;
  int steps = 0;
  std::vector<motion::MotionFrame> frames;  // one per control step
};

// Deterministic single-episode rollout under the mean action. Success is
// crossing the tile's far edge without falling, within the time budget.
inline EpisodeOutcome run_episode(const train::ActorCritic& policy,
                                  const prior::LatentPrior& prior,
                                  const train::StyleReference& style,
                                  const RunConfig& cfg, sim::TerrainKind kind,
                                  int level, std::uint64_t seed,
                                  bool record_frames = false) {
  sim::QuadrupedEnv env(cfg.env);
  std::mt19937_64 rng(seed);
  auto terrain = sim::build_terrain(kind, level, rng());
  sim::DomainRandomization rand;
  if (cfg.trainer.per_episode_randomization) rand = sim::randomize(rng());

  env.reset(terrain, rand, style.seed_state_frame(prior.window_w()));
  train::MimicPipeline pipeline;
  pipeline.reset(prior, style.frames);

  EpisodeOutcome out;
  const int max_steps = static_cast<int>(
      std::llround(cfg.trainer.traversal_time_budget / cfg.env.control_dt));
  for (int t = 0; t < max_steps; ++t) {
    pipeline.refresh_target();
    auto obs = env.assemble_observation(pipeline.z_target.mean);
    auto g = policy.actor.evaluate_gaussian(obs);
    env.step(g.mean.col(0));
    pipeline.push_frame(env.current_frame());
    ++out.steps;
    if (record_frames) out.frames.push_back(env.current_frame());
    if (env.fallen() || env.faulted()) {
      out.fell = true;
      return out;
    }
    if (env.state().p.x() >= sim::kTileSize) {
      out.traversed = true;
      return out;
    }
  }
  return out;
}

struct SuccessTable {
  std::vector<int> levels;
  std::vector<double> rates;                 // aligned with levels
  std::vector<double> thresholds = {0.95, 0.90, 0.75, 0.50, 0.10};
  std::vector<int> max_level_at_threshold;   // 0 when no level qualifies
};

// Success rate per level plus the maximum level meeting each threshold.
// `trial` receives (level, trial index) and must be thread-safe.
inline SuccessTable success_table(
    const std::function<bool(int, int)>& trial, const std::vector<int>& levels,
    int trials_per_level) {
  if (trials_per_level < 1) {
    throw std::invalid_argument("success_table: trials must be >= 1");
  }
  SuccessTable table;
  table.levels = levels;
  table.rates.assign(levels.size(), 0.0);

  struct Job {
    int level_idx;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    for (int t = 0; t < trials_per_level; ++t) {
      jobs.push_back({static_cast<int>(li), t});
    }
  }
  std::vector<int> successes(levels.size(), 0);
  const int workers = worker_count(static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (const auto& j : jobs) {
      if (trial(levels[j.level_idx], j.trial)) ++successes[j.level_idx];
    }
  } else {
    std::vector<std::vector<int>> partial(workers,
                                          std::vector<int>(levels.size(), 0));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t k = w; k < jobs.size(); k += workers) {
          const auto& j = jobs[k];
          if (trial(levels[j.level_idx], j.trial)) ++partial[w][j.level_idx];
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& p : partial) {
      for (std::size_t li = 0; li < levels.size(); ++li) successes[li] += p[li];
    }
  }
  for (std::size_t li = 0; li < levels.size(); ++li) {
    table.rates[li] =
        static_cast<double>(successes[li]) / static_cast<double>(trials_per_level);
  }
  for (double thr : table.thresholds) {
    int best = 0;
    for (std::size_t li = 0; li < levels.size(); ++li) {
      if (table.rates[li] >= thr) best = std::max(best, levels[li]);
    }
    table.max_level_at_threshold.push_back(best);
  }
  return table;
}

inline SuccessTable policy_success_table(const train::ActorCritic& policy,
                                         const prior::LatentPrior& prior,
                                         const train::StyleReference& style,
                                         const RunConfig& cfg,
                                         sim::TerrainKind kind,
                                         const std::vector<int>& levels,
                                         int trials_per_level) {
  auto trial = [&](int level, int t) {
    const std::uint64_t seed =
        cfg.seed * 1000003ull + static_cast<std::uint64_t>(level) * 1009ull +
        static_cast<std::uint64_t>(t);
    return run_episode(policy, prior, style, cfg, kind, level, seed).traversed;
  };
  return success_table(trial, levels, trials_per_level);
}

inline void write_success_csv(const SuccessTable& table,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "level,success_rate\n";
  for (std::size_t i = 0; i < table.levels.size(); ++i) {
    out << table.levels[i] << ',' << table.rates[i] << '\n';
  }
  out << "threshold,max_level\n";
  for (std::size_t i = 0; i < table.thresholds.size(); ++i) {
    out << table.thresholds[i] << ',' << table.max_level_at_threshold[i]
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

// One row per window: style label followed by the latent mean components.
inline void export_latents(const prior::LatentPrior& prior,
                           const std::vector<motion::MotionDataset>& datasets,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "style";
  for (int k = 0; k < prior.latent_dim(); ++k) out << ",z" << k;
  out << '\n';
  out.precision(17);
  for (const auto& ds : datasets) {
    const int count = prior.window_w() + 1;
    if (static_cast<int>(ds.frames.size()) < count) continue;
    for (std::size_t s = 0; s + count <= ds.frames.size(); ++s) {
      auto z = prior.encode_flat(train::flat_canonical_window(ds.frames, s, count));
      out << ds.style;
      for (int k = 0; k < z.dim(); ++k) out << ',' << z.mean(k);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace lm::eval
