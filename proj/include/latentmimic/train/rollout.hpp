#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "latentmimic/motion/frame.hpp"
#include "latentmimic/motion/gait.hpp"
#include "latentmimic/prior/prior.hpp"
#include "latentmimic/sim/env.hpp"

namespace lm::train {

// Flattens a window and expresses every frame's base position relative to
// the newest frame (idempotent). Keeps latents invariant to where in the
// world the motion happened.
inline nn::Vec flat_canonical_window(const std::deque<motion::MotionFrame>& frames) {
  const int fd = frames.front().dim();
  nn::Vec out(fd * static_cast<int>(frames.size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.segment(static_cast<int>(i) * fd, fd) =
        motion::flatten_frame(frames[i]);
  }
  const Eigen::Vector3d last_p = frames.back().p;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.segment(static_cast<int>(i) * fd, 3) -= last_p;
  }
  return out;
}

inline nn::Vec flat_canonical_window(const std::vector<motion::MotionFrame>& frames,
                                     std::size_t first, std::size_t count) {
  std::deque<motion::MotionFrame> d(frames.begin() + first,
                                    frames.begin() + first + count);
  return flat_canonical_window(d);
}

// Per-environment latent-mimic state: the trailing simulated window, its
// encoding z_sim, and the forecast target z_target with the target joint
// angles extracted from the predicted window's newest frame.
struct MimicPipeline {
  const prior::LatentPrior* prior = nullptr;
  std::deque<motion::MotionFrame> window;
  prior::LatentGaussian z_sim;
  prior::LatentGaussian z_target;
  nn::Vec target_q;

  void reset(const prior::LatentPrior& p,
             const std::vector<motion::MotionFrame>& seed_frames) {
    prior = &p;
    const int count = p.window_w() + 1;
    if (static_cast<int>(seed_frames.size()) < count) {
      throw std::invalid_argument("MimicPipeline: not enough seed frames");
    }
    window.assign(seed_frames.begin(), seed_frames.begin() + count);
    z_sim = p.encode_flat(flat_canonical_window(window));
  }

  // z_target = encode(predict_next(z_sim)); caches the predicted q target.
  void refresh_target() {
    nn::Vec pred = prior->predict_next_flat(z_sim);
    z_target = prior->encode_flat(pred);
    const int fd = prior->frame_dim();
    const int n = (fd - motion::kBaseDim) / 2;
    target_q = pred.segment(prior->window_w() * fd + motion::kBaseDim, n);
  }

  void push_frame(const motion::MotionFrame& f) {
    window.pop_front();
    window.push_back(f);
    z_sim = prior->encode_flat(flat_canonical_window(window));
  }
};

// Reference data for one style: the gait spec plus enough generated frames
// to seed pipelines and serve as tracking reference.
struct StyleReference {
  motion::GaitSpec spec;
  std::vector<motion::MotionFrame> frames;
  double frame_rate = 50.0;

  const motion::MotionFrame& seed_state_frame(int window_w) const {
    return frames.at(window_w);
  }
};

// The whole path is shifted so it starts at (start_x, start_y): episodes
// begin where the reference does, keeping seeded windows consistent with
// the simulated continuation.
inline StyleReference make_style_reference(motion::GaitStyle style,
                                           double duration, double frame_rate,
                                           double start_x = 0.5,
                                           double start_y = 0.5 * sim::kTileSize) {
  StyleReference ref;
  ref.spec = motion::default_gait_spec(style);
  ref.frames = motion::generate_gait(ref.spec, duration, frame_rate);
  ref.frame_rate = frame_rate;
  if (!ref.frames.empty()) {
    const Eigen::Vector3d shift(start_x - ref.frames.front().p.x(),
                                start_y - ref.frames.front().p.y(), 0.0);
    for (auto& f : ref.frames) f.p += shift;
  }
  return ref;
}

}  // namespace lm::train
