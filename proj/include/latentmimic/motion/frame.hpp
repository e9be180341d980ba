#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lm::motion {

using Vec = Eigen::VectorXd;

inline constexpr int kNumJoints = 12;  // 3 joints x 4 legs
inline constexpr int kBaseDim = 13;    // p(3) + quaternion(4) + velocities(6)

// One kinematic frame: base position, orientation (w,x,y,z quaternion),
// base linear+angular velocity, joint angles and velocities.
struct MotionFrame {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d theta = Eigen::Vector4d(1, 0, 0, 0);
  Eigen::Matrix<double, 6, 1> v = Eigen::Matrix<double, 6, 1>::Zero();
  Vec q = Vec::Zero(kNumJoints);
  Vec q_dot = Vec::Zero(kNumJoints);

  int joint_count() const { return static_cast<int>(q.size()); }
  int dim() const { return kBaseDim + 2 * joint_count(); }
};

inline void validate_frame(const MotionFrame& f, int frame_index = -1) {
  auto fail = [&](const std::string& what) {
    std::string where = frame_index >= 0
                            ? " at frame " + std::to_string(frame_index)
                            : "";
    throw std::runtime_error("invalid motion frame" + where + ": " + what);
  };
  if (f.q.size() != f.q_dot.size()) fail("q and q_dot lengths differ");
  if (std::abs(f.theta.norm() - 1.0) > 1e-6) {
    fail("quaternion norm " + std::to_string(f.theta.norm()));
  }
}

inline Vec flatten_frame(const MotionFrame& f) {
  Vec out(f.dim());
  out.segment(0, 3) = f.p;
  out.segment(3, 4) = f.theta;
  out.segment(7, 6) = f.v;
  out.segment(13, f.joint_count()) = f.q;
  out.segment(13 + f.joint_count(), f.joint_count()) = f.q_dot;
  return out;
}

inline MotionFrame unflatten_frame(const Vec& x) {
  const int n = static_cast<int>((x.size() - kBaseDim) / 2);
  if (kBaseDim + 2 * n != x.size()) {
    throw std::invalid_argument("unflatten_frame: bad vector length");
  }
  MotionFrame f;
  f.p = x.segment(0, 3);
  f.theta = x.segment(3, 4);
  f.v = x.segment(7, 6);
  f.q = x.segment(13, n);
  f.q_dot = x.segment(13 + n, n);
  return f;
}

// w+1 consecutive frames (times t-w .. t).
struct MotionWindow {
  std::vector<MotionFrame> frames;
  double frame_rate = 50.0;

  int window_w() const { return static_cast<int>(frames.size()) - 1; }
};

inline Vec flatten_window(const MotionWindow& win) {
  if (win.frames.empty()) return Vec();
  const int fd = win.frames.front().dim();
  Vec out(fd * static_cast<int>(win.frames.size()));
  for (std::size_t i = 0; i < win.frames.size(); ++i) {
    out.segment(static_cast<int>(i) * fd, fd) = flatten_frame(win.frames[i]);
  }
  return out;
}

inline MotionWindow unflatten_window(const Vec& x, int w, double frame_rate) {
  const int count = w + 1;
  if (x.size() % count != 0) {
    throw std::invalid_argument("unflatten_window: length not divisible");
  }
  const int fd = static_cast<int>(x.size()) / count;
  MotionWindow win;
  win.frame_rate = frame_rate;
  win.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    win.frames.push_back(unflatten_frame(x.segment(i * fd, fd)));
  }
  return win;
}

// Window i holds frames i..i+w; returns len-w windows (empty if too short).
inline std::vector<MotionWindow> make_windows(
    const std::vector<MotionFrame>& frames, int w, double frame_rate) {
  std::vector<MotionWindow> out;
  const int len = static_cast<int>(frames.size());
  if (len < w + 1) return out;
  out.reserve(len - w);
  for (int i = 0; i + w < len; ++i) {
    MotionWindow win;
    win.frame_rate = frame_rate;
    win.frames.assign(frames.begin() + i, frames.begin() + i + w + 1);
    out.push_back(std::move(win));
  }
  return out;
}

// Time reversal: frame k of the result is frame K-1-k of the input with
// velocities sign-flipped. An involution.
inline std::vector<MotionFrame> reverse_motion(
    const std::vector<MotionFrame>& frames) {
  std::vector<MotionFrame> out(frames.rbegin(), frames.rend());
  for (auto& f : out) {
    f.v = -f.v;
    f.q_dot = -f.q_dot;
  }
  return out;
}

}  // namespace lm::motion
