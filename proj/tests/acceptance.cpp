// Acceptance harness: one pass/fail line per criterion. Criteria can be
// selected by listing their numbers as arguments; the default runs all.
// Long-horizon criteria (6-10) share training artifacts in ./acceptance_work
// so the full suite fits its time budget on one core.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latentmimic/config.hpp"
#include "latentmimic/eval/evaluate.hpp"
#include "latentmimic/motion/gait.hpp"
#include "latentmimic/prior/decomposition.hpp"
#include "latentmimic/prior/prior.hpp"
#include "latentmimic/sim/heightfield.hpp"
#include "latentmimic/train/run_stage.hpp"
#include "latentmimic/train/trainer.hpp"

using namespace lm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Shared long-horizon artifacts.

const char* kWorkDir = "acceptance_work";

RunConfig base_config() {
  RunConfig cfg;
  cfg.seed = 7;
  return cfg;
}

std::string work_path(const char* name) {
  return (std::filesystem::path(kWorkDir) / name).string();
}

// Stage A artifacts (full-size prior on trot + pace).
void ensure_prior() {
  if (std::filesystem::exists(work_path("prior/prior.ckpt"))) return;
  RunConfig cfg = base_config();
  cfg.output_dir = work_path("prior");
  train::run_prior_stage(cfg);
}

prior::LatentPrior load_prior() {
  ensure_prior();
  auto j = train::load_checkpoint(work_path("prior/prior.ckpt"), "prior");
  return prior::LatentPrior::from_json(j.at("prior"));
}

// Stage B artifacts: 300 iterations, 16 envs, flat terrain.
void ensure_style_policy() {
  ensure_prior();
  const std::string dir = work_path("stageb");
  if (std::filesystem::exists(dir + "/style_policy.ckpt")) return;
  std::filesystem::create_directories(dir);
  std::filesystem::copy_file(work_path("prior/prior.ckpt"),
                             dir + "/prior.ckpt",
                             std::filesystem::copy_options::overwrite_existing);
  RunConfig cfg = base_config();
  cfg.output_dir = dir;
  train::run_imitation_stage(cfg);
}

train::ActorCritic load_policy(const std::string& ckpt, const char* key) {
  auto j = train::load_checkpoint(ckpt, "imitation");
  (void)key;
  return train::ActorCritic::from_json(j.at("policy"));
}

// Stage C artifacts, 150 iterations each, from the shared stage-B policy.
//   c1: adaptation buffer on,  anchor weight 0.1
//   c2: adaptation buffer off, anchor weight 0.1
//   c3: adaptation buffer on,  anchor weight 0.0
void ensure_stage_c(const char* name, bool buffer_on, double w_anchor) {
  ensure_style_policy();
  const std::string dir = work_path(name);
  if (std::filesystem::exists(dir + "/adapted_policy.ckpt")) return;
  std::filesystem::create_directories(dir);
  for (const char* f : {"prior.ckpt", "style_policy.ckpt"}) {
    std::filesystem::copy_file(
        work_path("stageb") + std::string("/") + f, dir + "/" + f,
        std::filesystem::copy_options::overwrite_existing);
  }
  RunConfig cfg = base_config();
  cfg.output_dir = dir;
  cfg.trainer.adaptation.enabled = buffer_on;
  cfg.rewards.weights.w_anchor = w_anchor;
  train::run_adaptation_stage(cfg);
}

// Deterministic per-trial success evaluation shared by criteria 7 and 8.
eval::SuccessTable success_for(const train::ActorCritic& policy,
                               const prior::LatentPrior& prior,
                               const RunConfig& cfg, sim::TerrainKind kind,
                               const std::vector<int>& levels, int trials) {
  auto style = train::make_style_reference(
      motion::gait_style_from_name(cfg.dataset.styles.at(0)),
      cfg.dataset.duration, cfg.dataset.frame_rate);
  return eval::policy_success_table(policy, prior, style, cfg, kind, levels,
                                    trials);
}

// ---------------------------------------------------------------------------
// Criterion 1: exact divergence decomposition.

Outcome criterion_1() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd p_ref(6), p_pi(6);
    for (int i = 0; i < 6; ++i) {
      p_ref(i) = u(rng);
      p_pi(i) = u(rng);
    }
    p_ref /= p_ref.sum();
    p_pi /= p_pi.sum();
    Eigen::MatrixXd channel(3, 6);
    for (int x = 0; x < 6; ++x) {
      for (int z = 0; z < 3; ++z) channel(z, x) = u(rng);
      channel.col(x) /= channel.col(x).sum();
    }
    auto d = prior::verify_decomposition(p_ref, p_pi, channel);
    if (d.infinite) return {false, "unexpected support violation"};
    const double gap = std::abs(d.total - (d.marginal + d.conditional));
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-12) {
      return {false, "identity gap " + fmt(gap) + " > 1e-12"};
    }
    if (d.marginal > d.total + 1e-12) {
      return {false, "marginal exceeds total"};
    }
  }
  return {true, "100 triples, worst identity gap " + fmt(worst_gap)};
}

// ---------------------------------------------------------------------------
// Criterion 2: Gaussian KL closed form vs Monte Carlo.

Outcome criterion_2() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> um(-1.0, 1.0);
  std::uniform_real_distribution<double> us(0.5, 2.0);
  std::normal_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const int d = 1 + static_cast<int>(rng() % 8);
    prior::LatentGaussian a, b;
    a.mean.resize(d);
    a.std.resize(d);
    b.mean.resize(d);
    b.std.resize(d);
    for (int i = 0; i < d; ++i) {
      a.mean(i) = um(rng);
      b.mean(i) = um(rng);
      a.std(i) = us(rng);
      b.std(i) = us(rng);
    }
    const double closed = prior::gaussian_kl(a, b);
    // MC estimate of E_{x~a}[log p_a(x) - log p_b(x)].
    double acc = 0.0;
    const int n = 1000000;
    for (int s = 0; s < n; ++s) {
      double lp = 0.0;
      for (int i = 0; i < d; ++i) {
        const double eps = unit(rng);
        const double x = a.mean(i) + a.std(i) * eps;
        const double za = eps;
        const double zb = (x - b.mean(i)) / b.std(i);
        lp += -0.5 * za * za - std::log(a.std(i)) + 0.5 * zb * zb +
              std::log(b.std(i));
      }
      acc += lp;
    }
    const double mc = acc / n;
    const double err = std::abs(closed - mc);
    worst = std::max(worst, err);
    if (err > 1e-2) {
      return {false, "closed " + fmt(closed) + " vs MC " + fmt(mc) +
                         " differ by " + fmt(err)};
    }
  }
  return {true, "20 pairs, worst |closed - MC| = " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Criterion 3: reverse-mode gradients vs central finite differences.

Outcome criterion_3() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int in = 2 + static_cast<int>(rng() % 4);
    const int hid = 4 + static_cast<int>(rng() % 5);
    const int out = 1 + static_cast<int>(rng() % 3);
    const bool gaussian = (rng() % 2) == 0;
    nn::DenseNet net({in, hid, out}, nn::Activation::kElu,
                     gaussian ? nn::OutputHead::kGaussian
                              : nn::OutputHead::kDeterministic);
    net.init(rng);
    Eigen::MatrixXd x(in, 2);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < in; ++i) x(i, j) = normal(rng);

    net.zero_grad();
    {
      nn::GradientTape tape;
      auto o = net.forward(tape, tape.input(x));
      tape.backward(tape.sum(o));
    }
    const double step = 1e-5;
    for (nn::Param* p : net.params()) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
          const double saved = p->value(i, j);
          p->value(i, j) = saved + step;
          const double up = net.evaluate(x).sum();
          p->value(i, j) = saved - step;
          const double dn = net.evaluate(x).sum();
          p->value(i, j) = saved;
          const double fd = (up - dn) / (2.0 * step);
          const double ad = p->grad(i, j);
          const double denom = std::max({std::abs(fd), std::abs(ad), 1e-6});
          worst = std::max(worst, std::abs(fd - ad) / denom);
        }
      }
    }
    if (worst >= 1e-4) {
      return {false, "max relative error " + fmt(worst) + " >= 1e-4"};
    }
  }
  return {true, "100 nets, max relative error " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Criterion 4: terrain golden values, exact to 1e-12.

Outcome criterion_4() {
  using sim::TerrainKind;
  const double tol = 1e-12;
  auto s1 = sim::build_terrain(TerrainKind::kStairs, 1, 0);
  auto s64 = sim::build_terrain(TerrainKind::kStairs, 64, 0);
  if (std::abs(sim::terrain_difficulty_param(TerrainKind::kStairs, 1) - 0.05) >
          tol ||
      std::abs(sim::terrain_difficulty_param(TerrainKind::kStairs, 64) -
               0.23) > tol) {
    return {false, "stair rise endpoints off"};
  }
  // Run of 0.3 m: the height at x and x + 0.3 always differs by one rise.
  for (double x : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const double lo = sim::sample_height(s64, x, 4.0);
    const double hi = sim::sample_height(s64, x + 0.3, 4.0);
    if (std::abs(hi - lo - 0.23) > 1e-9) {
      return {false, "stair run/rise mismatch at x = " + fmt(x)};
    }
  }
  if (std::abs(sim::sample_height(s1, 0.4, 4.0) - 0.05) > tol) {
    return {false, "level-1 stair rise not 0.05"};
  }
  auto w64 = sim::build_terrain(TerrainKind::kWaves, 64, 0);
  const double span = w64.grid.maxCoeff() - w64.grid.minCoeff();
  if (std::abs(span - 0.4) > tol) {
    return {false, "wave peak-to-valley " + fmt(span) + " != 0.4"};
  }
  auto n64 = sim::build_terrain(TerrainKind::kNoise, 64, 5);
  if (n64.grid.rows() != 80 || n64.grid.cols() != 80) {
    return {false, "noise grid is not 80x80"};
  }
  if (n64.grid.maxCoeff() > 0.1 + tol || n64.grid.minCoeff() < -0.1 - tol) {
    return {false, "noise exceeds +/-0.1 m"};
  }
  return {true, "stairs, waves, and noise goldens all exact"};
}

// ---------------------------------------------------------------------------
// Criterion 5: tolerance ramp, buffer admission, curriculum gating.

Outcome criterion_5() {
  rewards::ToleranceSchedule s;
  double prev = -1.0;
  for (int it = 0; it <= 2 * s.ramp_iterations; ++it) {
    const double t = rewards::current_threshold(s, it);
    if (t < prev) return {false, "tolerance not monotone at " + fmt(it)};
    prev = t;
  }
  if (rewards::current_threshold(s, 0) != 0.5 ||
      std::abs(rewards::current_threshold(s, s.ramp_iterations) -
               2.0 * M_PI) > 1e-12) {
    return {false, "tolerance endpoints wrong"};
  }
  for (std::size_t b = 1; b <= 1000; ++b) {
    const auto want = static_cast<std::size_t>(std::ceil(0.10 * double(b)));
    if (train::AdaptationBuffer::admission_count(b) != want) {
      return {false, "admission count wrong at B = " + fmt(double(b))};
    }
  }
  train::CurriculumState st(2, 5);
  train::curriculum_update(st, {{0, 5, false}, {1, 5, true}});
  if (st.levels[0] != 5 || st.levels[1] != 6) {
    return {false, "levels advance without traversal"};
  }
  st.levels[1] = 64;
  train::curriculum_update(st, {{1, 64, true}});
  if (st.levels[1] != 64) return {false, "level cap violated"};
  return {true, "ramp 0.5->2pi, admission ceil(0.10B), traversal gating"};
}

// ---------------------------------------------------------------------------
// Criterion 6: stage-B training beats a frozen random policy.

Outcome criterion_6() {
  ensure_style_policy();
  RunConfig cfg = base_config();
  cfg.output_dir = work_path("stageb");
  auto prior = load_prior();
  auto trained = load_policy(work_path("stageb/style_policy.ckpt"), "policy");

  std::mt19937_64 rng(base_config().seed + 1);
  train::ActorCritic scratch(
      sim::observation_dim(cfg.env.history_len, prior.latent_dim()),
      motion::kNumJoints, cfg.trainer.actor_hidden, rng);
  train::ActorCritic frozen_random(
      sim::observation_dim(cfg.env.history_len, prior.latent_dim()),
      motion::kNumJoints, cfg.trainer.actor_hidden, rng);

  train::Trainer probe(cfg, load_prior(), train::Stage::kImitation,
                       std::move(scratch), cfg.seed + 100);
  // Mimic reward compared under end-of-training conditions; episode
  // length compared under the strict iteration-0 tolerance.
  auto tm = probe.evaluate_policy(trained, cfg.trainer.horizon,
                                  cfg.trainer.style_iterations);
  auto rm = probe.evaluate_policy(frozen_random, cfg.trainer.horizon,
                                  cfg.trainer.style_iterations);
  auto ts = probe.evaluate_policy(trained, cfg.trainer.horizon, 0);
  auto rs = probe.evaluate_policy(frozen_random, cfg.trainer.horizon, 0);
  const bool mimic_ok = tm.mean_mimic >= 2.0 * rm.mean_mimic;
  const bool eplen_ok =
      ts.mean_episode_length >= 3.0 * rs.mean_episode_length;
  return {mimic_ok && eplen_ok,
          "trained mimic " + fmt(tm.mean_mimic) + " vs random " +
              fmt(rm.mean_mimic) + " (need 2x); tol-0 episode length " +
              fmt(ts.mean_episode_length) + " vs " +
              fmt(rs.mean_episode_length) + " (need 3x)"};
}

// ---------------------------------------------------------------------------
// Criterion 7: 16/16 flat traversals for the trained style policy.

Outcome criterion_7() {
  ensure_style_policy();
  RunConfig cfg = base_config();
  auto prior = load_prior();
  auto trained = load_policy(work_path("stageb/style_policy.ckpt"), "policy");
  auto table = success_for(trained, prior, cfg, sim::TerrainKind::kFlat, {1},
                           16);
  const double rate = table.rates.at(0);
  return {rate == 1.0, "flat success rate " + fmt(rate) + " (need 1.0)"};
}

// ---------------------------------------------------------------------------
// Criterion 8: adaptation buffer ablation on stairs.

Outcome criterion_8() {
  ensure_stage_c("c1", true, 0.1);
  ensure_stage_c("c2", false, 0.1);
  RunConfig cfg = base_config();
  auto prior_on = [&](const char* dir) {
    auto j = train::load_checkpoint(work_path(dir) +
                                        std::string("/adapted_policy.ckpt"),
                                    "adaptation");
    return std::pair{prior::LatentPrior::from_json(j.at("prior")),
                     train::ActorCritic::from_json(j.at("policy"))};
  };
  auto [p1, a1] = prior_on("c1");
  auto [p2, a2] = prior_on("c2");
  std::vector<int> levels = {1, 2, 3, 4, 5, 6};
  auto t1 = success_for(a1, p1, cfg, sim::TerrainKind::kStairs, levels, 16);
  auto t2 = success_for(a2, p2, cfg, sim::TerrainKind::kStairs, levels, 16);
  const int max1 = t1.max_level_at_threshold.at(3);  // >= 50% threshold
  const int max2 = t2.max_level_at_threshold.at(3);

  auto style_prior = load_prior();
  auto style = load_policy(work_path("stageb/style_policy.ckpt"), "policy");
  auto tb = success_for(style, style_prior, cfg, sim::TerrainKind::kStairs,
                        {2}, 16);
  const double c_rate = t1.rates.at(1);
  const double b_rate = tb.rates.at(0);

  const bool buffer_ok = max1 > max2;
  const bool level2_ok = c_rate > b_rate;
  return {buffer_ok && level2_ok,
          "stairs max level (>=50%): buffer-on " + fmt(max1) +
              " vs buffer-off " + fmt(max2) +
              "; level-2 success: stage-C " + fmt(c_rate) + " vs stage-B " +
              fmt(b_rate)};
}

// ---------------------------------------------------------------------------
// Criterion 9: latent space separates styles after pretraining.

Outcome criterion_9() {
  auto prior = load_prior();
  RunConfig cfg = base_config();
  std::vector<std::vector<Eigen::VectorXd>> latents;
  for (const auto& name : cfg.dataset.styles) {
    auto ds = train::build_datasets({/*path=*/"", {name},
                                     cfg.dataset.duration,
                                     cfg.dataset.frame_rate})[0];
    auto wins = motion::make_windows(ds.frames, prior.window_w(),
                                     ds.frame_rate);
    std::vector<Eigen::VectorXd> zs;
    for (const auto& w : wins) {
      auto flat = motion::flatten_window(w);
      zs.push_back(prior.encode_flat(
          train::flat_canonical_window(w.frames, 0, w.frames.size())).mean);
    }
    latents.push_back(std::move(zs));
  }
  std::mt19937_64 rng(9);
  auto pick = [&](const std::vector<Eigen::VectorXd>& v) -> const Eigen::VectorXd& {
    return v[rng() % v.size()];
  };
  double intra = 0.0, inter = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto& s = latents[rng() % latents.size()];
    intra += (pick(s) - pick(s)).norm();
    inter += (pick(latents[0]) - pick(latents[1])).norm();
  }
  intra /= 100.0;
  inter /= 100.0;
  return {intra < inter, "mean intra-style distance " + fmt(intra) +
                             " vs inter-style " + fmt(inter)};
}

// ---------------------------------------------------------------------------
// Criterion 10: anchor reward keeps the adapted policy near the style
// policy in action-distribution KL.

Outcome criterion_10() {
  ensure_stage_c("c1", true, 0.1);
  ensure_stage_c("c3", true, 0.0);
  RunConfig cfg = base_config();
  auto style_prior = load_prior();
  auto style = load_policy(work_path("stageb/style_policy.ckpt"), "policy");

  // Probe set: 1000 observations gathered by running the style policy
  // over the stage-C terrain mix.
  std::vector<Eigen::VectorXd> probe;
  auto ref = train::make_style_reference(
      motion::gait_style_from_name(cfg.dataset.styles.at(0)),
      cfg.dataset.duration, cfg.dataset.frame_rate);
  std::mt19937_64 rng(10);
  const std::vector<sim::TerrainKind> kinds = {
      sim::TerrainKind::kFlat, sim::TerrainKind::kStairs,
      sim::TerrainKind::kWaves, sim::TerrainKind::kNoise};
  int episode = 0;
  while (probe.size() < 1000) {
    sim::QuadrupedEnv env(cfg.env);
    auto terrain = sim::build_terrain(kinds[episode % kinds.size()],
                                      1 + static_cast<int>(rng() % 3), rng());
    env.reset(terrain, sim::randomize(rng()),
              ref.seed_state_frame(style_prior.window_w()));
    train::MimicPipeline pipeline;
    pipeline.reset(style_prior, ref.frames);
    for (int t = 0; t < 100 && probe.size() < 1000; ++t) {
      pipeline.refresh_target();
      auto obs = env.assemble_observation(pipeline.z_target.mean);
      probe.push_back(obs);
      auto g = style.actor.evaluate_gaussian(obs);
      env.step(g.mean.col(0));
      pipeline.push_frame(env.current_frame());
      if (env.fallen() || env.faulted()) break;
    }
    ++episode;
  }

  auto mean_kl = [&](const train::ActorCritic& pol) {
    double acc = 0.0;
    for (const auto& obs : probe) {
      acc += prior::gaussian_kl(train::policy_distribution(pol, obs),
                                train::policy_distribution(style, obs));
    }
    return acc / static_cast<double>(probe.size());
  };
  auto a1 = load_policy(work_path("c1/adapted_policy.ckpt"), "policy");
  auto a3 = load_policy(work_path("c3/adapted_policy.ckpt"), "policy");
  const double kl_anchor = mean_kl(a1);
  const double kl_none = mean_kl(a3);
  return {kl_anchor < kl_none,
          "mean KL to style policy: anchored " + fmt(kl_anchor) +
              " vs unanchored " + fmt(kl_none)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int n) { return selected.empty() || selected.count(n); };

  struct Entry {
    int number;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Entry> criteria = {
      {1, "divergence decomposition identity", criterion_1},
      {2, "Gaussian KL vs Monte Carlo", criterion_2},
      {3, "autodiff vs finite differences", criterion_3},
      {4, "terrain golden values", criterion_4},
      {5, "tolerance, admission, curriculum", criterion_5},
      {6, "stage-B training beats random", criterion_6},
      {7, "flat traversal success", criterion_7},
      {8, "adaptation buffer ablation", criterion_8},
      {9, "latent style separation", criterion_9},
      {10, "anchor reward ablation", criterion_10},
  };

  std::filesystem::create_directories(kWorkDir);
  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted(c.number)) continue;
    const double t0 = now_s();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double dt = now_s() - t0;
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion "
              << c.number << ": " << c.title << " — " << out.detail << " ("
              << fmt(dt) << " s)\n"
              << std::flush;
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
