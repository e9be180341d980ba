#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "latentmimic/motion/frame.hpp"
#include "latentmimic/motion/morphology.hpp"

namespace lm::motion {

enum class GaitStyle { kPace, kPaceBackwards, kTrot, kTrotBackwards };

inline std::string gait_style_name(GaitStyle s) {
  switch (s) {
    case GaitStyle::kPace: return "pace";
    case GaitStyle::kPaceBackwards: return "pace_backwards";
    case GaitStyle::kTrot: return "trot";
    case GaitStyle::kTrotBackwards: return "trot_backwards";
  }
  return "?";
}

inline GaitStyle gait_style_from_name(const std::string& name) {
  if (name == "pace") return GaitStyle::kPace;
  if (name == "pace_backwards") return GaitStyle::kPaceBackwards;
  if (name == "trot") return GaitStyle::kTrot;
  if (name == "trot_backwards") return GaitStyle::kTrotBackwards;
  throw std::invalid_argument("unknown gait style '" + name + "'");
}

struct GaitSpec {
  GaitStyle style = GaitStyle::kTrot;
  double base_speed = 1.6;        // m/s, forward-style speed
  double stride_frequency = 1.5;  // Hz
  double duty_factor = 0.55;      // stance fraction of the cycle
  std::array<double, 4> phase_offsets = {0.0, 0.5, 0.5, 0.0};  // LF RF LH RH
  double swing_lift = 0.06;       // m foot clearance during swing
  Morphology morphology;
};

// Pace pairs lateral legs (LF with LH), trot pairs diagonals (LF with RH).
inline GaitSpec default_gait_spec(GaitStyle style) {
  GaitSpec s;
  s.style = style;
  switch (style) {
    case GaitStyle::kPace:
    case GaitStyle::kPaceBackwards:
      s.base_speed = 0.9;
      s.stride_frequency = 1.2;
      s.phase_offsets = {0.0, 0.5, 0.0, 0.5};
      break;
    case GaitStyle::kTrot:
    case GaitStyle::kTrotBackwards:
      s.base_speed = 1.6;
      s.stride_frequency = 1.5;
      s.phase_offsets = {0.0, 0.5, 0.5, 0.0};
      break;
  }
  return s;
}

inline bool gait_is_backwards(GaitStyle s) {
  return s == GaitStyle::kPaceBackwards || s == GaitStyle::kTrotBackwards;
}

namespace detail {
inline double frac(double x) { return x - std::floor(x); }
}  // namespace detail

// Stance indicator per leg at time t (forward-style phase convention).
inline std::array<bool, 4> gait_contacts(const GaitSpec& spec, double t) {
  std::array<bool, 4> c;
  for (int leg = 0; leg < 4; ++leg) {
    double phase = detail::frac(spec.stride_frequency * t + spec.phase_offsets[leg]);
    c[leg] = phase < spec.duty_factor;
  }
  return c;
}

namespace detail {

// Within-cycle base oscillation of a natural gait: forward-speed
// modulation and vertical bob at twice the stride frequency (one pulse
// per stance event), lateral sway and roll at the stride frequency, and a
// small pitch oscillation. Pace gaits sway/roll more, trots pitch more.
// All position terms integrate to zero net drift over a cycle, so the
// base still advances at base_speed.
struct BaseOscillation {
  double speed_mod = 0.12;   // fraction of base_speed
  double bob = 0.015;        // m
  double sway = 0.015;       // m
  double roll = 0.03;        // rad
  double pitch = 0.04;       // rad
};

inline BaseOscillation base_oscillation(const GaitSpec& spec) {
  BaseOscillation o;
  if (spec.style == GaitStyle::kPace || spec.style == GaitStyle::kPaceBackwards) {
    o.sway = 0.025;
    o.roll = 0.06;
    o.pitch = 0.02;
  }
  return o;
}

// Base height at time t (bob included); feet are solved against this so
// stance feet stay on the ground plane.
inline double base_height_at(const GaitSpec& spec, double t) {
  const double w2 = 4.0 * M_PI * spec.stride_frequency;
  return spec.morphology.standing_height +
         base_oscillation(spec).bob * std::cos(w2 * t);
}

// Foot target in the hip frame at time t. Stance sweeps backward at the
// base speed (foot stationary in the world); swing returns it with a
// sinusoidal lift.
inline void foot_target(const GaitSpec& spec, int leg, double t, double* x,
                        double* z) {
  const double f = spec.stride_frequency;
  const double duty = spec.duty_factor;
  const double amp = spec.base_speed * duty / (2.0 * f);  // half stance sweep
  const double h = base_height_at(spec, t);
  const double phase = frac(f * t + spec.phase_offsets[leg]);
  if (phase < duty) {
    const double s = phase / duty;
    *x = amp * (1.0 - 2.0 * s);
    *z = -h;
  } else {
    const double s = (phase - duty) / (1.0 - duty);
    *x = -amp * std::cos(M_PI * s);
    *z = -h + spec.swing_lift * std::sin(M_PI * s);
  }
}

inline MotionFrame frame_at(const GaitSpec& spec, double t) {
  const BaseOscillation o = base_oscillation(spec);
  const double f = spec.stride_frequency;
  const double w1 = 2.0 * M_PI * f;
  const double w2 = 4.0 * M_PI * f;
  const double sp = spec.base_speed;

  MotionFrame frame;
  // Positions are the exact integrals of the velocities below.
  frame.p = Eigen::Vector3d(
      sp * t + sp * o.speed_mod * (1.0 - std::cos(w2 * t)) / w2,
      o.sway * std::sin(w1 * t), base_height_at(spec, t));
  const double roll = o.roll * std::sin(w1 * t);
  const double pitch = o.pitch * std::sin(w2 * t + 0.7);
  const Eigen::Quaterniond rot(Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()) *
                               Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()));
  frame.theta << rot.w(), rot.x(), rot.y(), rot.z();
  frame.v << sp * (1.0 + o.speed_mod * std::sin(w2 * t)),
      o.sway * w1 * std::cos(w1 * t), -o.bob * w2 * std::sin(w2 * t),
      o.roll * w1 * std::cos(w1 * t), o.pitch * w2 * std::cos(w2 * t + 0.7),
      0.0;
  for (int leg = 0; leg < 4; ++leg) {
    double x, z, thigh, knee;
    foot_target(spec, leg, t, &x, &z);
    leg_inverse_kinematics(spec.morphology, x, z, &thigh, &knee);
    frame.q(3 * leg + 0) = 0.0;  // abduction
    frame.q(3 * leg + 1) = thigh;
    frame.q(3 * leg + 2) = knee;
  }
  return frame;
}

}  // namespace detail

// Generates duration*frame_rate frames. Joint velocities are the backward
// finite difference of the joint angles at the frame rate (frame 0 copies
// frame 1). Backwards styles are exact time reversals of their forward
// counterpart with velocities sign-flipped.
inline std::vector<MotionFrame> generate_gait(const GaitSpec& spec,
                                              double duration,
                                              double frame_rate) {
  if (duration <= 0.0) throw std::invalid_argument("generate_gait: duration <= 0");
  if (frame_rate <= 0.0) throw std::invalid_argument("generate_gait: frame_rate <= 0");
  if (spec.duty_factor <= 0.0 || spec.duty_factor >= 1.0) {
    throw std::invalid_argument("generate_gait: duty_factor must be in (0,1)");
  }
  if (spec.base_speed <= 0.0) {
    throw std::invalid_argument("generate_gait: base_speed must be positive");
  }

  const int count = static_cast<int>(std::llround(duration * frame_rate));
  std::vector<MotionFrame> frames;
  frames.reserve(count);
  for (int k = 0; k < count; ++k) {
    frames.push_back(detail::frame_at(spec, static_cast<double>(k) / frame_rate));
  }
  for (int k = count - 1; k >= 1; --k) {
    frames[k].q_dot = (frames[k].q - frames[k - 1].q) * frame_rate;
  }
  if (count >= 2) frames[0].q_dot = frames[1].q_dot;

  if (gait_is_backwards(spec.style)) return reverse_motion(frames);
  return frames;
}

}  // namespace lm::motion
