#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/eval/evaluate.hpp"
#include "latentmimic/motion/gait.hpp"
#include "latentmimic/train/run_stage.hpp"

using namespace lm;

#ifndef LM_CLI_PATH
#error "LM_CLI_PATH must point at the command-line binary"
#endif

namespace {

std::string fresh_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(LM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

// Tiny but complete run configuration for subprocess tests.
RunConfig tiny_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.output_dir = out_dir;
  cfg.dataset.styles = {"trot", "pace"};
  cfg.dataset.duration = 2.0;
  cfg.prior.prior.latent_dim = 8;
  cfg.prior.prior.hidden = {32};
  cfg.prior.epochs = 2;
  cfg.prior.batch_size = 16;
  cfg.trainer.num_envs = 2;
  cfg.trainer.horizon = 8;
  cfg.trainer.actor_hidden = {32};
  cfg.trainer.style_iterations = 1;
  cfg.trainer.terrain_iterations = 1;
  cfg.trainer.traversal_time_budget = 0.2;  // keep eval episodes short
  cfg.eval.trials_per_level = 2;
  return cfg;
}

std::string write_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  out << config_to_json(cfg).dump(2);
  return path;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

TEST_CASE("tracking MSE matches its defining examples") {
  using motion::MotionFrame;
  auto frame = [](double x, std::initializer_list<double> q) {
    MotionFrame f;
    f.p = Eigen::Vector3d(x, 0.0, 0.3);
    f.q = Eigen::Map<const Eigen::VectorXd>(q.begin(),
                                            static_cast<Eigen::Index>(q.size()));
    f.q_dot = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q.size()));
    return f;
  };

  std::vector<MotionFrame> ref = {frame(0.0, {0.0, 0.0}),
                                  frame(0.1, {0.0, 0.0})};
  auto mse0 = eval::tracking_mse(ref, ref);
  CHECK(mse0.base_position == 0.0);
  CHECK(mse0.joint_angle == 0.0);
  CHECK(mse0.joint_velocity == 0.0);

  // Constant 0.1 m offset along x: base MSE = 0.01 m^2.
  std::vector<MotionFrame> off = {frame(0.1, {0.0, 0.0}),
                                  frame(0.2, {0.0, 0.0})};
  CHECK(eval::tracking_mse(off, ref).base_position ==
        doctest::Approx(0.01).epsilon(1e-12));

  // Joint errors (0.1, 0.2) then (0.0, 0.1): the mean over 2 steps and
  // 2 joints of the squared errors is (0.01 + 0.04 + 0 + 0.01) / 4 = 0.015.
  std::vector<MotionFrame> joff = {frame(0.0, {0.1, 0.2}),
                                   frame(0.1, {0.0, 0.1})};
  const double expected = 0.015;
  CHECK(eval::tracking_mse(joff, ref).joint_angle ==
        doctest::Approx(expected).epsilon(1e-12));

  std::vector<MotionFrame> shorter = {frame(0.0, {0.0, 0.0})};
  CHECK_THROWS_WITH_AS(eval::tracking_mse(shorter, ref),
                       doctest::Contains("1"), std::invalid_argument);
}

TEST_CASE("success table: rates, thresholds, and monotone max levels") {
  // 52 of 64 trials succeed -> rate 0.8125.
  auto trial_52 = [](int, int t) { return t < 52; };
  auto t1 = eval::success_table(trial_52, {3}, 64);
  CHECK(t1.rates[0] == doctest::Approx(0.8125).epsilon(1e-15));

  // Rates 1.0 / 0.9 / 0.4 at levels 1..3.
  auto trial = [](int level, int t) {
    if (level == 1) return true;
    if (level == 2) return t < 9;
    return t < 4;
  };
  auto t2 = eval::success_table(trial, {1, 2, 3}, 10);
  CHECK(t2.rates == std::vector<double>{1.0, 0.9, 0.4});
  REQUIRE(t2.thresholds == std::vector<double>{0.95, 0.90, 0.75, 0.50, 0.10});
  CHECK(t2.max_level_at_threshold == std::vector<int>{1, 2, 2, 2, 3});
  for (std::size_t i = 1; i < t2.max_level_at_threshold.size(); ++i) {
    CHECK(t2.max_level_at_threshold[i] >= t2.max_level_at_threshold[i - 1]);
  }

  CHECK_THROWS_AS(eval::success_table(trial, {1}, 0), std::invalid_argument);
}

TEST_CASE("success table is identical across LM_THREADS settings") {
  auto trial = [](int level, int t) { return (level * 31 + t * 7) % 5 != 0; };
  setenv("LM_THREADS", "1", 1);
  auto serial = eval::success_table(trial, {1, 2, 3, 4}, 25);
  setenv("LM_THREADS", "4", 1);
  auto parallel = eval::success_table(trial, {1, 2, 3, 4}, 25);
  unsetenv("LM_THREADS");
  CHECK(serial.rates == parallel.rates);
  CHECK(serial.max_level_at_threshold == parallel.max_level_at_threshold);

  // LM_THREADS caps the worker count; hardware may cap it further.
  setenv("LM_THREADS", "3", 1);
  CHECK(eval::worker_count(100) <= 3);
  CHECK(eval::worker_count(100) >= 1);
  setenv("LM_THREADS", "1", 1);
  CHECK(eval::worker_count(100) == 1);
  unsetenv("LM_THREADS");
  CHECK(eval::worker_count(1) == 1);
}

TEST_CASE("config JSON round-trips exactly and rejects unknown keys") {
  RunConfig cfg = tiny_config("/tmp/lm_cfg_rt");
  cfg.seed = 99;
  cfg.rewards.weights.w_anchor = 0.0;
  auto j = config_to_json(cfg);
  RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  j["trainer"]["bogus"] = 1;
  CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("bogus"),
                       std::runtime_error);
}

TEST_CASE("cli: usage errors exit 2, help exits 0") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("train-style") == 2);       // --config is required
  CHECK(run_cli("pretrain-prior") == 2);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("eval-success --help") == 0);
}

TEST_CASE("cli: gen-terrain writes a stairs grid with 0.23 m risers") {
  const std::string dir = fresh_dir("lm_cli_gen");
  CHECK(run_cli("gen-terrain --kind stairs --level 64 --out " + dir) == 0);
  const std::string csv = slurp(dir + "/terrain_stairs_64.csv");
  auto lines = split_lines(csv);
  REQUIRE(lines.size() > 10);
  // Column 0 of consecutive rows climbs in steps of 0 or 0.23.
  double prev = -1.0;
  bool saw_rise = false;
  for (const auto& line : lines) {
    const double h = std::stod(line.substr(0, line.find(',')));
    if (prev >= 0.0) {
      const double d = h - prev;
      CHECK((std::abs(d) < 1e-9 || std::abs(d - 0.23) < 1e-9));
      if (std::abs(d - 0.23) < 1e-9) saw_rise = true;
    }
    prev = h;
  }
  CHECK(saw_rise);
  CHECK(run_cli("gen-terrain --kind stairs --level 99 --out " + dir) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli: pretrain-prior then export-latents end to end") {
  const std::string dir = fresh_dir("lm_cli_prior");
  RunConfig cfg = tiny_config(dir);
  const std::string cfg_path = write_config(cfg, dir + "/config_in.json");

  CHECK(run_cli("pretrain-prior --config " + cfg_path) == 0);
  CHECK(std::filesystem::exists(dir + "/prior.ckpt"));
  CHECK(std::filesystem::exists(dir + "/config.json"));

  CHECK(run_cli("export-latents --config " + cfg_path) == 0);
  const std::string csv = slurp(dir + "/latents.csv");
  auto lines = split_lines(csv);
  // Header plus one row per window: two styles x (100 - 9) windows.
  REQUIRE(lines.size() == 1 + 2 * 91);
  CHECK(lines[0] == "style,z0,z1,z2,z3,z4,z5,z6,z7");
  CHECK(lines[1].rfind("trot,", 0) == 0);
  CHECK(lines.back().rfind("pace,", 0) == 0);

  // Re-export is byte-identical.
  const std::string first = slurp(dir + "/latents.csv");
  CHECK(run_cli("export-latents --config " + cfg_path) == 0);
  CHECK(slurp(dir + "/latents.csv") == first);

  // Missing checkpoint: runtime error -> exit 1.
  const std::string dir2 = fresh_dir("lm_cli_prior2");
  RunConfig cfg2 = tiny_config(dir2);
  const std::string cfg2_path = write_config(cfg2, dir2 + "/config_in.json");
  CHECK(run_cli("export-latents --config " + cfg2_path) == 1);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("cli: eval-success and eval-tracking on a fabricated checkpoint") {
  const std::string dir = fresh_dir("lm_cli_eval");
  RunConfig cfg = tiny_config(dir);
  const std::string cfg_path = write_config(cfg, dir + "/config_in.json");

  // Build an untrained policy checkpoint directly.
  std::mt19937_64 rng(3);
  prior::LatentPrior prior(
      cfg.prior.prior,
      static_cast<int>(motion::flatten_frame(motion::MotionFrame{}).size()),
      cfg.dataset.frame_rate, rng);
  auto datasets = train::build_datasets(cfg.dataset);
  prior.pretrain(datasets, 1, 16, rng);
  train::ActorCritic policy(
      sim::observation_dim(cfg.env.history_len, prior.latent_dim()),
      motion::kNumJoints, cfg.trainer.actor_hidden, rng);
  train::save_checkpoint(dir + "/style_policy.ckpt",
                         {{"policy", policy.to_json()},
                          {"prior", prior.to_json()}},
                         cfg);

  CHECK(run_cli("eval-success --config " + cfg_path +
                " --terrain stairs --levels 1..2 --trials 2") == 0);
  const std::string csv = slurp(dir + "/success_stairs.csv");
  auto lines = split_lines(csv);
  REQUIRE(lines.size() == 1 + 2 + 1 + 5);
  CHECK(lines[0] == "level,success_rate");
  CHECK(lines[1].rfind("1,", 0) == 0);
  CHECK(lines[3] == "threshold,max_level");

  CHECK(run_cli("eval-tracking --config " + cfg_path) == 0);
  const std::string track = slurp(dir + "/tracking.csv");
  auto tlines = split_lines(track);
  REQUIRE(tlines.size() == 2);
  CHECK(tlines[0] ==
        "style,steps,base_position_mse,joint_angle_mse,joint_velocity_mse");
  CHECK(tlines[1].rfind("trot,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli: --seed and --out override the config") {
  const std::string dir = fresh_dir("lm_cli_override");
  RunConfig cfg = tiny_config(dir + "/unused");
  const std::string cfg_path = write_config(cfg, dir + "/config_in.json");
  CHECK(run_cli("pretrain-prior --config " + cfg_path + " --seed 5 --out " +
                dir + "/alt") == 0);
  CHECK(std::filesystem::exists(dir + "/alt/prior.ckpt"));
  CHECK_FALSE(std::filesystem::exists(dir + "/unused/prior.ckpt"));
  const std::string saved = slurp(dir + "/alt/config.json");
  CHECK(saved.find("\"seed\": 5") != std::string::npos);
  std::filesystem::remove_all(dir);
}
