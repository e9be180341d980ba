#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/motion/dataset.hpp"
#include "latentmimic/motion/gait.hpp"
#include "latentmimic/train/trainer.hpp"

namespace lm::train {

inline std::vector<motion::MotionDataset> build_datasets(
    const DatasetConfig& d) {
  if (!d.path.empty()) return {motion::load_dataset(d.path)};
  std::vector<motion::MotionDataset> out;
  for (const auto& name : d.styles) {
    motion::MotionDataset ds;
    ds.style = name;
    ds.frame_rate = d.frame_rate;
    ds.frames = motion::generate_gait(
        motion::default_gait_spec(motion::gait_style_from_name(name)),
        d.duration, d.frame_rate);
    out.push_back(std::move(ds));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, nlohmann::json body,
                            const RunConfig& cfg) {
  body["config_hash"] = config_hash(cfg);
  body["seed"] = cfg.seed;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << body.dump();
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline nlohmann::json load_checkpoint(const std::string& path,
                                      const std::string& needed_stage) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("missing checkpoint " + path + "; run the " +
                             needed_stage + " stage first");
  }
  nlohmann::json j;
  in >> j;
  return j;
}

namespace detail {

inline std::string join(const std::string& dir, const char* file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void write_config_json(const RunConfig& cfg) {
  std::ofstream out(join(cfg.output_dir, "config.json"));
  out << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace detail

// Stage A: pretrain the latent prior on the motion datasets.
inline void run_prior_stage(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  auto datasets = build_datasets(cfg.dataset);
  std::mt19937_64 rng(cfg.seed);
  prior::LatentPrior prior(cfg.prior.prior, motion::MotionFrame{}.dim(),
                           cfg.dataset.frame_rate, rng);
  prior.pretrain(datasets, cfg.prior.epochs, cfg.prior.batch_size, rng);
  save_checkpoint(detail::join(cfg.output_dir, "prior.ckpt"),
                  {{"prior", prior.to_json()}}, cfg);
  detail::write_config_json(cfg);
}

// Stage B: style policy on flat terrain, mimic reward only. The encoder is
// fine-tuned on mixed batches during training, so the checkpoint carries the
// updated prior alongside the policy.
inline void run_imitation_stage(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  auto pj = load_checkpoint(detail::join(cfg.output_dir, "prior.ckpt"),
                            "prior");
  auto prior = prior::LatentPrior::from_json(pj.at("prior"));

  std::mt19937_64 rng(cfg.seed + 1);
  ActorCritic policy(
      sim::observation_dim(cfg.env.history_len, prior.latent_dim()),
      motion::kNumJoints, cfg.trainer.actor_hidden, rng);

  Trainer trainer(cfg, std::move(prior), Stage::kImitation, std::move(policy),
                  cfg.seed + 2);
  std::ofstream metrics(detail::join(cfg.output_dir, "metrics.csv"));
  trainer.train(cfg.trainer.style_iterations, &metrics);

  save_checkpoint(detail::join(cfg.output_dir, "style_policy.ckpt"),
                  {{"policy", trainer.policy().to_json()},
                   {"prior", trainer.prior().to_json()}},
                  cfg);
  detail::write_config_json(cfg);
}

// Stage C: terrain adaptation from the style policy, with the frozen style
// policy as anchor and predictor fine-tuning from the adaptation buffer.
inline void run_adaptation_stage(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  load_checkpoint(detail::join(cfg.output_dir, "prior.ckpt"), "prior");
  auto sj = load_checkpoint(detail::join(cfg.output_dir, "style_policy.ckpt"),
                            "imitation");
  auto prior = prior::LatentPrior::from_json(sj.at("prior"));
  auto style_policy = ActorCritic::from_json(sj.at("policy"));

  Trainer trainer(cfg, std::move(prior), Stage::kAdaptation, style_policy,
                  cfg.seed + 3);
  trainer.set_anchor_policy(std::move(style_policy));
  std::ofstream metrics(detail::join(cfg.output_dir, "metrics.csv"));
  trainer.train(cfg.trainer.terrain_iterations, &metrics);

  save_checkpoint(detail::join(cfg.output_dir, "adapted_policy.ckpt"),
                  {{"policy", trainer.policy().to_json()},
                   {"prior", trainer.prior().to_json()}},
                  cfg);
  detail::write_config_json(cfg);
}

inline void run_stage(const RunConfig& cfg, const std::string& stage) {
  if (stage == "prior") {
    run_prior_stage(cfg);
  } else if (stage == "imitation") {
    run_imitation_stage(cfg);
  } else if (stage == "adaptation") {
    run_adaptation_stage(cfg);
  } else {
    throw std::invalid_argument("unknown stage '" + stage + "'");
  }
}

}  // namespace lm::train
