#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/eval/evaluate.hpp"
#include "latentmimic/train/run_stage.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::int64_t seed = -1;  // -1: keep the config's seed
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config_path, "config JSON path");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--out", opts.out, "override the output directory");
}

lm::RunConfig resolve_config(const CommonOpts& opts) {
  lm::RunConfig cfg =
      opts.config_path.empty() ? lm::RunConfig{} : lm::load_config(opts.config_path);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  return cfg;
}

std::string out_file(const lm::RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

// "3" or "1..8" (inclusive).
std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    levels.push_back(std::stoi(text));
    return levels;
  }
  const int lo = std::stoi(text.substr(0, dots));
  const int hi = std::stoi(text.substr(dots + 2));
  if (lo < 1 || hi < lo) {
    throw CLI::ValidationError("--levels", "expected LO..HI with 1 <= LO <= HI");
  }
  for (int l = lo; l <= hi; ++l) levels.push_back(l);
  return levels;
}

struct LoadedPolicy {
  lm::prior::LatentPrior prior;
  lm::train::ActorCritic policy;
};

LoadedPolicy load_policy_checkpoint(const lm::RunConfig& cfg,
                                    const std::string& file,
                                    const std::string& stage) {
  auto j = lm::train::load_checkpoint(
      (std::filesystem::path(cfg.output_dir) / file).string(), stage);
  LoadedPolicy lp;
  lp.prior = lm::prior::LatentPrior::from_json(j.at("prior"));
  lp.policy = lm::train::ActorCritic::from_json(j.at("policy"));
  return lp;
}

int run_eval_tracking(const lm::RunConfig& cfg, const std::string& ckpt) {
  auto lp = load_policy_checkpoint(cfg, ckpt, "imitation");
  auto style = lm::train::make_style_reference(
      lm::motion::gait_style_from_name(cfg.dataset.styles.at(0)),
      cfg.dataset.duration, cfg.dataset.frame_rate);
  auto outcome = lm::eval::run_episode(lp.policy, lp.prior, style, cfg,
                                       lm::sim::TerrainKind::kFlat, 1,
                                       cfg.seed, /*record_frames=*/true);
  const int w = lp.prior.window_w();
  const std::size_t available = style.frames.size() > static_cast<std::size_t>(w + 1)
                                    ? style.frames.size() - w - 1
                                    : 0;
  const std::size_t steps = std::min(outcome.frames.size(), available);
  if (steps == 0) throw std::runtime_error("eval-tracking: no overlap to score");

  // Align both trajectories to their own starting base position.
  std::vector<lm::motion::MotionFrame> sim(outcome.frames.begin(),
                                           outcome.frames.begin() + steps);
  std::vector<lm::motion::MotionFrame> ref(style.frames.begin() + w + 1,
                                           style.frames.begin() + w + 1 + steps);
  const Eigen::Vector3d sim0 = sim.front().p;
  const Eigen::Vector3d ref0 = ref.front().p;
  for (auto& f : sim) f.p -= sim0;
  for (auto& f : ref) f.p -= ref0;

  auto mse = lm::eval::tracking_mse(sim, ref);
  std::ofstream out(out_file(cfg, "tracking.csv"));
  out << "style,steps,base_position_mse,joint_angle_mse,joint_velocity_mse\n";
  out << cfg.dataset.styles.at(0) << ',' << steps << ',' << mse.base_position
      << ',' << mse.joint_angle << ',' << mse.joint_velocity << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentmimic: two-stage latent-space imitation for quadruped "
               "locomotion"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string terrain = "stairs";
  std::string levels_text = "1";
  int trials = -1;
  int level = 1;
  std::string ckpt_file = "style_policy.ckpt";

  auto* pretrain = app.add_subcommand("pretrain-prior",
                                      "pretrain the latent motion prior");
  add_common(pretrain, opts, true);

  auto* style = app.add_subcommand("train-style",
                                   "train the flat-terrain style policy");
  add_common(style, opts, true);

  auto* terrain_cmd = app.add_subcommand("train-terrain",
                                         "terrain-adaptation training");
  add_common(terrain_cmd, opts, true);

  auto* tracking = app.add_subcommand("eval-tracking",
                                      "tracking errors on flat terrain");
  add_common(tracking, opts, true);
  tracking->add_option("--checkpoint", ckpt_file,
                       "policy checkpoint file name");

  auto* success = app.add_subcommand("eval-success",
                                     "success rates across terrain levels");
  add_common(success, opts, true);
  success->add_option("--terrain", terrain, "terrain kind");
  success->add_option("--levels", levels_text, "level or LO..HI range");
  success->add_option("--trials", trials, "trials per level");
  success->add_option("--checkpoint", ckpt_file,
                      "policy checkpoint file name");

  auto* latents = app.add_subcommand("export-latents",
                                     "export latent means per window");
  add_common(latents, opts, true);

  auto* gen = app.add_subcommand("gen-terrain", "export a terrain grid CSV");
  add_common(gen, opts, false);
  gen->add_option("--kind", terrain, "terrain kind");
  gen->add_option("--level", level, "difficulty level 1..64");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    const lm::RunConfig cfg = resolve_config(opts);
    if (pretrain->parsed()) {
      lm::train::run_stage(cfg, "prior");
    } else if (style->parsed()) {
      lm::train::run_stage(cfg, "imitation");
    } else if (terrain_cmd->parsed()) {
      lm::train::run_stage(cfg, "adaptation");
    } else if (tracking->parsed()) {
      return run_eval_tracking(cfg, ckpt_file);
    } else if (success->parsed()) {
      auto lp = load_policy_checkpoint(cfg, ckpt_file, "imitation");
      auto ref = lm::train::make_style_reference(
          lm::motion::gait_style_from_name(cfg.dataset.styles.at(0)),
          cfg.dataset.duration, cfg.dataset.frame_rate);
      auto kind = lm::sim::terrain_kind_from_name(terrain);
      auto table = lm::eval::policy_success_table(
          lp.policy, lp.prior, ref, cfg, kind, parse_levels(levels_text),
          trials > 0 ? trials : cfg.eval.trials_per_level);
      lm::eval::write_success_csv(
          table, out_file(cfg, "success_" + terrain + ".csv"));
    } else if (latents->parsed()) {
      auto j = lm::train::load_checkpoint(
          (std::filesystem::path(cfg.output_dir) / "prior.ckpt").string(),
          "prior");
      auto prior = lm::prior::LatentPrior::from_json(j.at("prior"));
      lm::eval::export_latents(prior, lm::train::build_datasets(cfg.dataset),
                               out_file(cfg, "latents.csv"));
    } else if (gen->parsed()) {
      auto kind = lm::sim::terrain_kind_from_name(terrain);
      auto hf = lm::sim::build_terrain(kind, level, cfg.seed);
      lm::sim::export_terrain_csv(
          hf, out_file(cfg, "terrain_" + terrain + "_" +
                                std::to_string(level) + ".csv"));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
