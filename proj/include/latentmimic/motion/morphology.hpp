#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

namespace lm::motion {

// Generic small-quadruped proportions shared by the gait generator and the
// simulator: body 0.4 x 0.2 m, hip/thigh/calf 0.08/0.21/0.21 m.
struct Morphology {
  double body_length = 0.4;
  double body_width = 0.2;
  double hip_offset = 0.08;   // lateral, from hip pivot to leg plane
  double thigh_length = 0.21;
  double calf_length = 0.21;
  double standing_height = 0.35;  // hip height over ground when standing

  // Hip pivot positions in the base frame (x fwd, y left, z up).
  // Leg order: LF, RF, LH, RH.
  std::array<Eigen::Vector3d, 4> hip_positions() const {
    const double hx = body_length / 2.0;
    const double hy = body_width / 2.0;
    return {Eigen::Vector3d(hx, hy, 0), Eigen::Vector3d(hx, -hy, 0),
            Eigen::Vector3d(-hx, hy, 0), Eigen::Vector3d(-hx, -hy, 0)};
  }

  // +1 for left legs, -1 for right.
  static double side_sign(int leg) { return (leg == 0 || leg == 2) ? 1.0 : -1.0; }
};

inline constexpr const char* kLegNames[4] = {"LF", "RF", "LH", "RH"};

// Foot position in the hip frame for joint triple (abduction, thigh pitch,
// knee). Thigh pitch is measured from straight down, knee is relative to the
// thigh; a negative knee bends the foot backward.
inline Eigen::Vector3d leg_forward_kinematics(const Morphology& m, int leg,
                                              double abduction, double thigh,
                                              double knee) {
  const double l1 = m.thigh_length;
  const double l2 = m.calf_length;
  const double x = l1 * std::sin(thigh) + l2 * std::sin(thigh + knee);
  const double z = -l1 * std::cos(thigh) - l2 * std::cos(thigh + knee);
  const double y0 = Morphology::side_sign(leg) * m.hip_offset;
  // Abduction rotates the leg plane about the x axis.
  const double ca = std::cos(abduction), sa = std::sin(abduction);
  return {x, ca * y0 - sa * z, sa * y0 + ca * z};
}

// Planar two-link IK in the leg's sagittal plane (abduction = 0): given a
// foot target (x forward, z down-negative) relative to the hip, returns
// (thigh, knee) with the knee bent backward. Targets outside reach are
// clamped to the boundary.
inline void leg_inverse_kinematics(const Morphology& m, double x, double z,
                                   double* thigh, double* knee) {
  const double l1 = m.thigh_length;
  const double l2 = m.calf_length;
  double r2 = x * x + z * z;
  const double rmax = l1 + l2;
  const double rmin = std::abs(l1 - l2) + 1e-6;
  r2 = std::min(r2, rmax * rmax * (1.0 - 1e-12));
  r2 = std::max(r2, rmin * rmin);
  double d = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  d = std::max(-1.0, std::min(1.0, d));
  const double k = -std::acos(d);  // knee backward
  const double a =
      std::atan2(x, -z) - std::atan2(l2 * std::sin(k), l1 + l2 * std::cos(k));
  *thigh = a;
  *knee = k;
}

}  // namespace lm::motion
