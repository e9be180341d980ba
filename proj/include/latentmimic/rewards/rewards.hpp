#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latentmimic/prior/latent.hpp"

namespace lm::rewards {

struct RewardWeights {
  double w_r = 0.01;           // mimic KL scale
  double w_speed = -1.0;       // velocity tracking penalty
  double w_orientation = -1.0; // projected-gravity xy penalty
  double w_angular = -0.5;     // angular-velocity xy penalty
  double w_anchor = 0.1;       // anchor KL scale (magnitude used)
};

// exp(-w_r * KL(z_target || z_sim)) in (0, 1]; 1 iff the latents coincide.
inline double mimic_reward(const prior::LatentGaussian& z_target,
                           const prior::LatentGaussian& z_sim, double w_r,
                           bool reverse_kl = false) {
  double kl = reverse_kl ? prior::gaussian_kl(z_sim, z_target)
                         : prior::gaussian_kl(z_target, z_sim);
  return std::exp(-w_r * kl);
}

// w_speed*|v - v_hat| + w_orientation*(Gx^2 + Gy^2) + w_angular*(wx^2 + wy^2).
// With the default negative weights this is 0 in the perfect case and
// negative otherwise. Only the x/y components of G and omega enter.
inline double task_reward(double v, double v_hat,
                          const Eigen::Vector3d& projected_gravity,
                          const Eigen::Vector3d& angular_velocity,
                          const RewardWeights& w) {
  const double speed_term = w.w_speed * std::abs(v - v_hat);
  const double orient_term =
      w.w_orientation * (projected_gravity.x() * projected_gravity.x() +
                         projected_gravity.y() * projected_gravity.y());
  const double angular_term =
      w.w_angular * (angular_velocity.x() * angular_velocity.x() +
                     angular_velocity.y() * angular_velocity.y());
  return speed_term + orient_term + angular_term;
}

// exp(-|w_anchor| * KL(pi_current || pi_style)) over the action
// distributions at a shared observation; 1 iff they coincide.
inline double anchor_reward(const prior::LatentGaussian& pi_current,
                            const prior::LatentGaussian& pi_style,
                            double w_anchor) {
  return std::exp(-std::abs(w_anchor) *
                  prior::gaussian_kl(pi_current, pi_style));
}

// E_joint = max_i |q_sim_i - q_target_i|, no angle wrapping.
inline double joint_error(const Eigen::VectorXd& q_sim,
                          const Eigen::VectorXd& q_target) {
  if (q_sim.size() != q_target.size()) {
    throw std::invalid_argument("joint_error: length mismatch");
  }
  return (q_sim - q_target).cwiseAbs().maxCoeff();
}

// Linear ramp of the early-termination tolerance from 0.5 rad to 2*pi.
struct ToleranceSchedule {
  double t_start = 0.5;
  double t_end = 2.0 * M_PI;
  int ramp_iterations = 1000;
};

inline double current_threshold(const ToleranceSchedule& s, int iteration) {
  if (iteration < 0) throw std::invalid_argument("iteration must be >= 0");
  double frac = s.ramp_iterations <= 0
                    ? 1.0
                    : std::min(1.0, static_cast<double>(iteration) /
                                        static_cast<double>(s.ramp_iterations));
  return s.t_start + frac * (s.t_end - s.t_start);
}

inline bool should_terminate(double e_joint, const ToleranceSchedule& s,
                             int iteration) {
  return e_joint > current_threshold(s, iteration);
}

}  // namespace lm::rewards
