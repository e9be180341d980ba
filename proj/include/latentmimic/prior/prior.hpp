#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "latentmimic/motion/dataset.hpp"
#include "latentmimic/motion/frame.hpp"
#include "latentmimic/nn/dense_net.hpp"
#include "latentmimic/nn/optimizer.hpp"
#include "latentmimic/nn/serialize.hpp"
#include "latentmimic/prior/latent.hpp"

namespace lm::prior {

using nn::Mat;

struct PriorConfig {
  int latent_dim = 16;
  int window_w = 9;
  std::vector<int> hidden = {256, 128};
  double beta = 1e-3;          // weight of the latent KL regularizer
  double learning_rate = 3e-4;
  // Mixed fine-tuning nudges the embedding under a live policy reward;
  // anything near the pretraining rate destroys the reward signal.
  double finetune_learning_rate = 3e-5;
  // Mixed fine-tuning stop rule: symmetric KL between batch-averaged mocap
  // and simulated latents below this for `stop_consecutive` evaluations.
  double stop_kl = 0.05;
  int stop_consecutive = 3;
  int eval_interval = 10;
};

struct NormStats {
  nn::Vec mean;
  nn::Vec std;
};

// Rebases every frame's position onto the window's newest frame so latents
// do not depend on where in the world the motion happened. Idempotent.
inline void canonicalize_window_positions(Eigen::Ref<nn::Vec> flat_window,
                                          int frame_dim) {
  const int count = static_cast<int>(flat_window.size()) / frame_dim;
  const Eigen::Vector3d last_p = flat_window.segment((count - 1) * frame_dim, 3);
  for (int i = 0; i < count; ++i) {
    flat_window.segment(i * frame_dim, 3) -= last_p;
  }
}

struct EpochLog {
  double recon_loss = 0.0;
  double pred_loss = 0.0;
};

// Bounded twin store of mocap and simulated windows; fine-tuning batches
// draw exactly half from each side.
class MixedReplayBuffer {
 public:
  explicit MixedReplayBuffer(std::size_t capacity_each = 4096)
      : capacity_(capacity_each) {}

  void push_mocap(nn::Vec window) { push(mocap_, std::move(window)); }
  void push_simulated(nn::Vec window) { push(simulated_, std::move(window)); }

  std::size_t mocap_size() const { return mocap_.size(); }
  std::size_t simulated_size() const { return simulated_.size(); }

  // batch_size columns, first half mocap, second half simulated.
  Mat sample(std::mt19937_64& rng, int batch_size) const {
    if (batch_size % 2 != 0) {
      throw std::invalid_argument("MixedReplayBuffer: batch size must be even");
    }
    if (mocap_.empty() || simulated_.empty()) {
      throw std::logic_error("MixedReplayBuffer: a store is empty");
    }
    const int half = batch_size / 2;
    const int dim = static_cast<int>(mocap_.front().size());
    Mat out(dim, batch_size);
    std::uniform_int_distribution<std::size_t> dm(0, mocap_.size() - 1);
    std::uniform_int_distribution<std::size_t> ds(0, simulated_.size() - 1);
    for (int j = 0; j < half; ++j) out.col(j) = mocap_[dm(rng)];
    for (int j = 0; j < half; ++j) out.col(half + j) = simulated_[ds(rng)];
    return out;
  }

 private:
  void push(std::deque<nn::Vec>& store, nn::Vec w) {
    store.push_back(std::move(w));
    while (store.size() > capacity_) store.pop_front();
  }

  std::size_t capacity_;
  std::deque<nn::Vec> mocap_;
  std::deque<nn::Vec> simulated_;
};

// Motion encoder (window -> diagonal gaussian latent), decoder (latent ->
// window) and motion predictor (latent mean -> next window). Inputs are
// normalized with dataset statistics frozen at pretraining time.
class LatentPrior {
 public:
  LatentPrior() = default;

  LatentPrior(PriorConfig cfg, int frame_dim, double frame_rate,
              std::mt19937_64& rng)
      : cfg_(std::move(cfg)), frame_dim_(frame_dim), frame_rate_(frame_rate) {
    window_dim_ = frame_dim_ * (cfg_.window_w + 1);
    std::vector<int> enc = {window_dim_};
    enc.insert(enc.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    enc.push_back(cfg_.latent_dim);
    std::vector<int> dec = {cfg_.latent_dim};
    dec.insert(dec.end(), cfg_.hidden.rbegin(), cfg_.hidden.rend());
    dec.push_back(window_dim_);
    std::vector<int> pred = {cfg_.latent_dim};
    pred.insert(pred.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    pred.push_back(window_dim_);
    encoder_ = nn::DenseNet(enc, nn::Activation::kElu, nn::OutputHead::kGaussian,
                            "encoder");
    decoder_ = nn::DenseNet(dec, nn::Activation::kElu,
                            nn::OutputHead::kDeterministic, "decoder");
    predictor_ = nn::DenseNet(pred, nn::Activation::kElu,
                              nn::OutputHead::kDeterministic, "predictor");
    encoder_.init(rng);
    decoder_.init(rng);
    predictor_.init(rng);
    stats_.mean = nn::Vec::Zero(window_dim_);
    stats_.std = nn::Vec::Ones(window_dim_);
  }

  const PriorConfig& config() const { return cfg_; }
  int latent_dim() const { return cfg_.latent_dim; }
  int window_w() const { return cfg_.window_w; }
  int window_dim() const { return window_dim_; }
  int frame_dim() const { return frame_dim_; }
  double frame_rate() const { return frame_rate_; }
  bool finetune_halted() const { return finetune_halted_; }
  const NormStats& stats() const { return stats_; }

  // Normalized inputs are clipped to +-kNormClip standard deviations so
  // out-of-distribution simulated states cannot blow up the latents.
  static constexpr double kNormClip = 5.0;

  // Encoder output stds are confined to [2, 10]. The reconstruction loss
  // pushes stds onto the lower bound, so the bound sets the latent metric:
  // KL between two encodings is ~ |mean gap|^2 / 8, which keeps
  // exp(-w_r * KL) rewards in a range with a usable gradient even for the
  // window deviations seen deep into simulated episodes.
  static constexpr double kEncLogStdMin = 0.6931471805599453;   // ln 2
  static constexpr double kEncLogStdMax = 2.302585092994046;    // ln 10

  nn::Vec normalize(const nn::Vec& x) const {
    return ((x - stats_.mean).array() / stats_.std.array())
        .min(kNormClip).max(-kNormClip).matrix();
  }
  nn::Vec denormalize(const nn::Vec& x) const {
    return (x.array() * stats_.std.array()).matrix() + stats_.mean;
  }
  Mat normalize_batch(const Mat& x) const {
    return ((x.colwise() - stats_.mean).array().colwise() /
            stats_.std.array()).min(kNormClip).max(-kNormClip).matrix();
  }

  // Canonicalize + normalize raw window columns.
  Mat prepare_batch(Mat x) const {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      canonicalize_window_positions(x.col(j), frame_dim_);
    }
    return normalize_batch(x);
  }

  // --- inference ----------------------------------------------------------

  LatentGaussian encode(const motion::MotionWindow& window) const {
    return encode_flat(motion::flatten_window(window));
  }

  LatentGaussian encode_flat(nn::Vec flat_window) const {
    if (flat_window.size() != window_dim_) {
      throw std::invalid_argument("encode: window dim " +
                                  std::to_string(flat_window.size()) +
                                  ", expected " + std::to_string(window_dim_));
    }
    canonicalize_window_positions(flat_window, frame_dim_);
    auto g = encoder_gaussian(normalize(flat_window));
    return {g.mean.col(0), g.std.col(0)};
  }

  // Batched encode: columns are flattened raw windows.
  std::vector<LatentGaussian> encode_batch(Mat flat_windows) const {
    for (Eigen::Index j = 0; j < flat_windows.cols(); ++j) {
      canonicalize_window_positions(flat_windows.col(j), frame_dim_);
    }
    auto g = encoder_gaussian(normalize_batch(flat_windows));
    std::vector<LatentGaussian> out(flat_windows.cols());
    for (Eigen::Index j = 0; j < flat_windows.cols(); ++j) {
      out[j] = {g.mean.col(j), g.std.col(j)};
    }
    return out;
  }

  // Predictor consumes the latent mean and emits the next window.
  motion::MotionWindow predict_next(const LatentGaussian& z) const {
    return motion::unflatten_window(predict_next_flat(z), cfg_.window_w,
                                    frame_rate_);
  }

  nn::Vec predict_next_flat(const LatentGaussian& z) const {
    if (z.dim() != cfg_.latent_dim) {
      throw std::invalid_argument("predict_next: latent dim mismatch");
    }
    return denormalize(predictor_.evaluate(z.mean));
  }

  Mat predict_next_batch_normalized(const Mat& latent_means) const {
    return predictor_.evaluate(latent_means);
  }

  // Mean-path reconstruction. Loss = normalized-space MSE plus
  // beta * KL(latent || N(0, I)).
  std::pair<motion::MotionWindow, double> reconstruct(
      const motion::MotionWindow& window) const {
    nn::Vec flat = motion::flatten_window(window);
    canonicalize_window_positions(flat, frame_dim_);
    nn::Vec norm = normalize(flat);
    auto g = encoder_gaussian(norm);
    nn::Vec dec = decoder_.evaluate(g.mean);
    double mse = (dec - norm).squaredNorm() / static_cast<double>(norm.size());
    double kl = 0.5 * (g.mean.array().square() + g.std.array().square() -
                       2.0 * g.std.array().log() - 1.0)
                          .sum();
    double loss = mse + cfg_.beta * kl;
    return {motion::unflatten_window(denormalize(dec), cfg_.window_w,
                                     frame_rate_),
            loss};
  }

  // --- training -----------------------------------------------------------

  void fit_stats(const std::vector<nn::Vec>& windows) {
    if (windows.empty()) throw std::invalid_argument("fit_stats: no windows");
    nn::Vec mean = nn::Vec::Zero(window_dim_);
    for (const auto& w : windows) mean += w;
    mean /= static_cast<double>(windows.size());
    nn::Vec var = nn::Vec::Zero(window_dim_);
    for (const auto& w : windows) var += (w - mean).array().square().matrix();
    var /= static_cast<double>(windows.size());
    stats_.mean = mean;
    // Dimensions the dataset never exercises (e.g. lateral drift, vertical
    // base velocity in procedural gaits) would otherwise blow up
    // out-of-distribution inputs by 1/std; 0.1 matches the natural physical
    // scales (m, m/s, rad/s, unit quaternions) of frame features.
    stats_.std = var.array().sqrt().max(0.1).matrix();
  }

  // Joint pretraining of encoder/decoder (VAE-style reconstruction) and
  // predictor (next-window MSE from the detached latent mean). Windows and
  // next-window pairs come from the given datasets; statistics are fit once
  // here and frozen.
  std::vector<EpochLog> pretrain(
      const std::vector<motion::MotionDataset>& datasets, int epochs,
      int batch_size, std::mt19937_64& rng) {
    std::vector<nn::Vec> windows;
    std::vector<std::pair<int, int>> pairs;  // (window idx, next window idx)
    for (const auto& ds : datasets) {
      auto wins = motion::make_windows(ds.frames, cfg_.window_w, ds.frame_rate);
      const int base = static_cast<int>(windows.size());
      for (std::size_t i = 0; i < wins.size(); ++i) {
        nn::Vec flat = motion::flatten_window(wins[i]);
        canonicalize_window_positions(flat, frame_dim_);
        windows.push_back(std::move(flat));
        if (i + 1 < wins.size()) {
          pairs.emplace_back(base + static_cast<int>(i),
                             base + static_cast<int>(i) + 1);
        }
      }
    }
    if (windows.empty()) {
      throw std::invalid_argument("pretrain: datasets produce no windows");
    }
    fit_stats(windows);

    std::vector<nn::Vec> norm;
    norm.reserve(windows.size());
    for (const auto& w : windows) norm.push_back(normalize(w));

    nn::OptimizerState enc_opt(cfg_.learning_rate);
    nn::OptimizerState pred_opt(cfg_.learning_rate);
    auto enc_params = encoder_.params();
    auto dec_params = decoder_.params();
    std::vector<nn::Param*> ae_params = enc_params;
    ae_params.insert(ae_params.end(), dec_params.begin(), dec_params.end());
    auto pred_params = predictor_.params();

    std::vector<int> win_idx(windows.size());
    std::vector<int> pair_idx(pairs.size());
    for (std::size_t i = 0; i < win_idx.size(); ++i) win_idx[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < pair_idx.size(); ++i) pair_idx[i] = static_cast<int>(i);

    std::vector<EpochLog> log;
    log.reserve(epochs);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::shuffle(win_idx.begin(), win_idx.end(), rng);
      std::shuffle(pair_idx.begin(), pair_idx.end(), rng);
      EpochLog el;
      int rb = 0, pb = 0;

      for (std::size_t off = 0; off < win_idx.size();
           off += static_cast<std::size_t>(batch_size)) {
        const int bsz = static_cast<int>(
            std::min<std::size_t>(batch_size, win_idx.size() - off));
        Mat x(window_dim_, bsz);
        for (int j = 0; j < bsz; ++j) x.col(j) = norm[win_idx[off + j]];
        el.recon_loss += autoencoder_step(x, ae_params, enc_opt, rng);
        ++rb;
      }

      for (std::size_t off = 0; off < pair_idx.size();
           off += static_cast<std::size_t>(batch_size)) {
        const int bsz = static_cast<int>(
            std::min<std::size_t>(batch_size, pair_idx.size() - off));
        Mat x(window_dim_, bsz), y(window_dim_, bsz);
        for (int j = 0; j < bsz; ++j) {
          x.col(j) = norm[pairs[pair_idx[off + j]].first];
          y.col(j) = norm[pairs[pair_idx[off + j]].second];
        }
        el.pred_loss += predictor_step(x, y, pred_params, pred_opt);
        ++pb;
      }

      if (rb > 0) el.recon_loss /= rb;
      if (pb > 0) el.pred_loss /= pb;
      log.push_back(el);
    }
    return log;
  }

  // Encoder/decoder fine-tuning on half-mocap half-simulated batches.
  // Permanently halts once the stop rule fires; returns gradient steps taken.
  int finetune_mixed(MixedReplayBuffer& buffer, int steps, int batch_size,
                     std::mt19937_64& rng) {
    if (finetune_halted_) return 0;
    if (buffer.mocap_size() == 0 || buffer.simulated_size() == 0) return 0;

    if (!mixed_opt_) {
      mixed_opt_ =
          std::make_unique<nn::OptimizerState>(cfg_.finetune_learning_rate);
    }
    auto enc_params = encoder_.params();
    auto dec_params = decoder_.params();
    std::vector<nn::Param*> params = enc_params;
    params.insert(params.end(), dec_params.begin(), dec_params.end());

    int taken = 0;
    for (int s = 0; s < steps; ++s) {
      if (s % cfg_.eval_interval == 0) {
        if (evaluate_stop_rule(buffer, batch_size, rng)) {
          finetune_halted_ = true;
          return taken;
        }
      }
      Mat raw = buffer.sample(rng, batch_size);
      autoencoder_step(prepare_batch(raw), params, *mixed_opt_, rng);
      ++taken;
    }
    return taken;
  }

  // Predictor-only fine-tuning step on (window, next window) pairs given as
  // raw flattened columns. Returns the batch MSE before the update.
  double finetune_predictor_step(const Mat& windows, const Mat& next_windows) {
    if (!pred_ft_opt_) {
      pred_ft_opt_ = std::make_unique<nn::OptimizerState>(cfg_.learning_rate);
    }
    auto params = predictor_.params();
    return predictor_step(prepare_batch(windows),
                          prepare_batch(next_windows), params, *pred_ft_opt_);
  }

  double predictor_mse(const Mat& windows, const Mat& next_windows) const {
    auto g = encoder_gaussian(prepare_batch(windows));
    Mat pred = predictor_.evaluate(g.mean);
    Mat err = pred - prepare_batch(next_windows);
    return err.squaredNorm() / static_cast<double>(err.size());
  }

  nn::DenseNet& encoder() { return encoder_; }
  nn::DenseNet& decoder() { return decoder_; }
  nn::DenseNet& predictor() { return predictor_; }
  const nn::DenseNet& encoder() const { return encoder_; }
  const nn::DenseNet& decoder() const { return decoder_; }
  const nn::DenseNet& predictor() const { return predictor_; }

  // --- checkpointing ------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["latent_dim"] = cfg_.latent_dim;
    j["window_w"] = cfg_.window_w;
    j["hidden"] = cfg_.hidden;
    j["beta"] = cfg_.beta;
    j["learning_rate"] = cfg_.learning_rate;
    j["finetune_learning_rate"] = cfg_.finetune_learning_rate;
    j["stop_kl"] = cfg_.stop_kl;
    j["stop_consecutive"] = cfg_.stop_consecutive;
    j["eval_interval"] = cfg_.eval_interval;
    j["frame_dim"] = frame_dim_;
    j["frame_rate"] = frame_rate_;
    j["finetune_halted"] = finetune_halted_;
    j["stats_mean"] = std::vector<double>(stats_.mean.data(),
                                          stats_.mean.data() + stats_.mean.size());
    j["stats_std"] = std::vector<double>(stats_.std.data(),
                                         stats_.std.data() + stats_.std.size());
    j["encoder"] = nn::net_to_json(encoder_);
    j["decoder"] = nn::net_to_json(decoder_);
    j["predictor"] = nn::net_to_json(predictor_);
    return j;
  }

  static LatentPrior from_json(const nlohmann::json& j) {
    LatentPrior p;
    p.cfg_.latent_dim = j.at("latent_dim").get<int>();
    p.cfg_.window_w = j.at("window_w").get<int>();
    p.cfg_.hidden = j.at("hidden").get<std::vector<int>>();
    p.cfg_.beta = j.at("beta").get<double>();
    p.cfg_.learning_rate = j.at("learning_rate").get<double>();
    p.cfg_.finetune_learning_rate = j.at("finetune_learning_rate").get<double>();
    p.cfg_.stop_kl = j.at("stop_kl").get<double>();
    p.cfg_.stop_consecutive = j.at("stop_consecutive").get<int>();
    p.cfg_.eval_interval = j.at("eval_interval").get<int>();
    p.frame_dim_ = j.at("frame_dim").get<int>();
    p.frame_rate_ = j.at("frame_rate").get<double>();
    p.finetune_halted_ = j.at("finetune_halted").get<bool>();
    p.window_dim_ = p.frame_dim_ * (p.cfg_.window_w + 1);
    auto sm = j.at("stats_mean").get<std::vector<double>>();
    auto ss = j.at("stats_std").get<std::vector<double>>();
    p.stats_.mean = Eigen::Map<nn::Vec>(sm.data(), sm.size());
    p.stats_.std = Eigen::Map<nn::Vec>(ss.data(), ss.size());
    p.encoder_ = nn::net_from_json(j.at("encoder"));
    p.decoder_ = nn::net_from_json(j.at("decoder"));
    p.predictor_ = nn::net_from_json(j.at("predictor"));
    return p;
  }

 private:
  nn::GaussianValue encoder_gaussian(const Mat& input) const {
    auto g = encoder_.evaluate_gaussian(input);
    g.std = g.std.array().max(std::exp(kEncLogStdMin))
                .min(std::exp(kEncLogStdMax)).matrix();
    return g;
  }

  // One reparameterized VAE step on normalized windows; returns the loss.
  double autoencoder_step(const Mat& x, std::vector<nn::Param*>& params,
                          nn::OptimizerState& opt, std::mt19937_64& rng) {
    encoder_.zero_grad();
    decoder_.zero_grad();
    nn::GradientTape tape;
    auto xin = tape.input(x);
    auto g = encoder_.forward_gaussian(tape, xin);
    g.log_std = tape.clamp(g.log_std, kEncLogStdMin, kEncLogStdMax);
    auto std_node = tape.exp(g.log_std);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat eps(cfg_.latent_dim, x.cols());
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (int i = 0; i < cfg_.latent_dim; ++i) eps(i, j) = normal(rng);
    auto z = tape.add(g.mean, tape.mul(std_node, tape.input(eps)));
    auto dec = decoder_.forward(tape, z);
    auto mse = tape.mean(tape.square(tape.sub(dec, xin)));
    // KL(q(z|x) || N(0, I)) per column, averaged over the batch.
    auto kl_elem = tape.scale(
        tape.sub(tape.add(tape.square(g.mean), tape.square(std_node)),
                 tape.add_scalar(tape.scale(g.log_std, 2.0), 1.0)),
        0.5);
    auto kl = tape.mean(tape.colwise_sum(kl_elem));
    auto loss = tape.add(mse, tape.scale(kl, cfg_.beta));
    tape.backward(loss);
    opt.step(params);
    return tape.value(loss)(0, 0);
  }

  // One predictor MSE step; x/y are normalized windows. The encoder latent
  // is detached so only the predictor trains.
  double predictor_step(const Mat& x, const Mat& y,
                        std::vector<nn::Param*>& params,
                        nn::OptimizerState& opt) {
    predictor_.zero_grad();
    auto g = encoder_.evaluate_gaussian(x);
    nn::GradientTape tape;
    auto zin = tape.input(g.mean);
    auto pred = predictor_.forward(tape, zin);
    auto loss = tape.mean(tape.square(tape.sub(pred, tape.input(y))));
    tape.backward(loss);
    opt.step(params);
    return tape.value(loss)(0, 0);
  }

  bool evaluate_stop_rule(const MixedReplayBuffer& buffer, int batch_size,
                          std::mt19937_64& rng) {
    Mat raw = buffer.sample(rng, batch_size);
    auto g = encoder_gaussian(prepare_batch(raw));
    const int half = batch_size / 2;
    LatentGaussian mocap{g.mean.leftCols(half).rowwise().mean(),
                         g.std.leftCols(half).rowwise().mean()};
    LatentGaussian sim{g.mean.rightCols(half).rowwise().mean(),
                       g.std.rightCols(half).rowwise().mean()};
    double kl = symmetric_gaussian_kl(mocap, sim);
    if (kl < cfg_.stop_kl) {
      ++stop_hits_;
    } else {
      stop_hits_ = 0;
    }
    return stop_hits_ >= cfg_.stop_consecutive;
  }

  PriorConfig cfg_;
  int frame_dim_ = 0;
  int window_dim_ = 0;
  double frame_rate_ = 50.0;
  bool finetune_halted_ = false;
  int stop_hits_ = 0;
  nn::DenseNet encoder_, decoder_, predictor_;
  NormStats stats_;
  std::unique_ptr<nn::OptimizerState> mixed_opt_;
  std::unique_ptr<nn::OptimizerState> pred_ft_opt_;
};

}  // namespace lm::prior
