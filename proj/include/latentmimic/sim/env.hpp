#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <vector>

#include "latentmimic/motion/frame.hpp"
#include "latentmimic/motion/morphology.hpp"
#include "latentmimic/sim/heightfield.hpp"
#include "latentmimic/sim/randomization.hpp"

namespace lm::sim {

using Vec = Eigen::VectorXd;

struct EnvConfig {
  double control_dt = 0.02;  // 50 Hz control
  int substeps = 4;          // 200 Hz physics
  double kp = 20.0;
  double kd = 0.5;
  double torque_limit = 23.7;   // N*m
  double joint_inertia = 0.01;  // kg*m^2 per joint
  double base_mass = 12.0;      // kg
  Eigen::Vector3d base_inertia = Eigen::Vector3d(0.13, 0.36, 0.42);
  double contact_stiffness = 2e4;  // N/m
  double contact_damping = 200.0;  // N*s/m
  double slip_velocity = 0.05;     // m/s, Coulomb smoothing
  // Per-foot ceiling on the friction force/velocity slope (N*s/m); keeps the
  // smoothed Coulomb law inside the explicit-integration stability limit.
  double friction_viscous_cap = 30.0;
  // Hard caps on base velocities (m/s, rad/s). Explicit integration of the
  // gyroscopic term diverges once the base spins far outside the physical
  // envelope, so tumbling states are clamped instead of allowed to overflow.
  double max_base_speed = 20.0;
  double max_base_spin = 20.0;
  double gravity = 9.81;           // m/s^2; 0 disables gravity
  bool actuation_enabled = true;
  int latency_substeps = 6;  // round(0.03 s * 200 Hz)
  int history_len = 5;       // H frames
  double fall_height = 0.05; // m, base clearance below which the robot fell
  bool action_is_offset = true;  // targets relative to the standing pose
  motion::Morphology morphology;
};

struct RobotState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d theta = Eigen::Vector4d(1, 0, 0, 0);  // w x y z
  Eigen::Matrix<double, 6, 1> v = Eigen::Matrix<double, 6, 1>::Zero();
  Vec q = Vec::Zero(motion::kNumJoints);
  Vec q_dot = Vec::Zero(motion::kNumJoints);
  std::array<bool, 4> foot_contacts = {false, false, false, false};
  double time = 0.0;
};

// Observation layout: [o_prop(9) | o_history(H * 42) | z_target mean(d)].
// o_prop = base-frame linear velocity, angular velocity, projected gravity.
// History frame = IMU(6: projected gravity, angular velocity) + previous
// action(12) + joint angles(12) + joint velocities(12).
inline constexpr int kPropDim = 9;
inline constexpr int kHistoryFrameDim = 42;

inline int observation_dim(int history_len, int latent_dim) {
  return kPropDim + history_len * kHistoryFrameDim + latent_dim;
}

// Floating rigid base with massless PD-driven legs. Ground reaction comes
// from a spring-damper penalty at each foot, applied to the base.
class QuadrupedEnv {
 public:
  explicit QuadrupedEnv(EnvConfig cfg = {}) : cfg_(cfg) {
    nominal_pose_ = Vec::Zero(motion::kNumJoints);
    double thigh, knee;
    motion::leg_inverse_kinematics(cfg_.morphology, 0.0,
                                   -cfg_.morphology.standing_height, &thigh,
                                   &knee);
    for (int leg = 0; leg < 4; ++leg) {
      nominal_pose_(3 * leg + 1) = thigh;
      nominal_pose_(3 * leg + 2) = knee;
    }
  }

  const EnvConfig& config() const { return cfg_; }
  const Vec& nominal_pose() const { return nominal_pose_; }
  const HeightField& terrain() const { return terrain_; }
  const DomainRandomization& randomization() const { return rand_; }
  const RobotState& state() const { return state_; }
  bool faulted() const { return faulted_; }

  // Places the robot at the frame's pose, height-adjusted so no foot starts
  // below the local terrain. History and latency buffers are zero/seeded.
  RobotState reset(const HeightField& terrain, const DomainRandomization& rand,
                   const motion::MotionFrame& frame) {
    terrain_ = terrain;
    rand_ = rand;
    faulted_ = false;
    state_ = RobotState{};
    state_.p = frame.p;
    state_.theta = frame.theta / frame.theta.norm();
    state_.v = frame.v;
    state_.q = frame.q;
    state_.q_dot = frame.q_dot;
    state_.time = 0.0;

    // Raise the base so neither the base center nor any foot penetrates.
    auto feet = foot_positions();
    double offset = sample_height(terrain_, state_.p.x(), state_.p.y());
    for (const auto& f : feet) {
      double ground = sample_height(terrain_, f.x(), f.y());
      double foot_z_rel = f.z() - state_.p.z();  // frame-height foot z
      offset = std::max(offset, ground - (frame.p.z() + foot_z_rel));
    }
    state_.p.z() = frame.p.z() + offset;

    feet = foot_positions();
    for (int leg = 0; leg < 4; ++leg) {
      double pen = sample_height(terrain_, feet[leg].x(), feet[leg].y()) -
                   feet[leg].z();
      if (pen > 0.05) {
        throw std::runtime_error("reset: unrecoverable initial penetration at " +
                                 std::string(motion::kLegNames[leg]));
      }
      prev_feet_[leg] = feet[leg];
    }
    update_contacts(feet);

    last_action_ = Vec::Zero(motion::kNumJoints);
    history_.assign(cfg_.history_len, Vec::Zero(kHistoryFrameDim));
    proprio_log_.assign(cfg_.latency_substeps + 1, proprio_snapshot());
    return state_;
  }

  // One 200 Hz physics substep under a fixed joint-angle target.
  void substep(const Vec& target_q) {
    const double dt = cfg_.control_dt / cfg_.substeps;
    const Eigen::Quaterniond rot(state_.theta(0), state_.theta(1),
                                 state_.theta(2), state_.theta(3));

    // Torque-limited PD joint dynamics.
    if (cfg_.actuation_enabled) {
      const double kp = cfg_.kp * rand_.kp_factor;
      const double kd = cfg_.kd * rand_.kd_factor;
      for (int i = 0; i < motion::kNumJoints; ++i) {
        double tau = rand_.motor_strength *
                     (kp * (target_q(i) - state_.q(i)) - kd * state_.q_dot(i));
        tau = std::clamp(tau, -cfg_.torque_limit, cfg_.torque_limit);
        state_.q_dot(i) += dt * tau / cfg_.joint_inertia;
      }
    }
    state_.q += dt * state_.q_dot;
    clamp_joints();

    // Contact forces at the feet, applied to the base.
    const double m = cfg_.base_mass + rand_.added_mass;
    Eigen::Vector3d com =
        state_.p + rot * Eigen::Vector3d(rand_.com_displacement, 0, 0);
    Eigen::Vector3d force(0, 0, -m * cfg_.gravity);
    Eigen::Vector3d torque = Eigen::Vector3d::Zero();
    auto feet = foot_positions();
    for (int leg = 0; leg < 4; ++leg) {
      Eigen::Vector3d vel = (feet[leg] - prev_feet_[leg]) / dt;
      prev_feet_[leg] = feet[leg];
      double pen = sample_height(terrain_, feet[leg].x(), feet[leg].y()) -
                   feet[leg].z();
      if (pen <= 0.0) continue;
      double fn = cfg_.contact_stiffness * pen - cfg_.contact_damping * vel.z();
      if (fn <= 0.0) continue;
      Eigen::Vector3d vt(vel.x(), vel.y(), 0.0);
      double vt_norm = vt.norm();
      double slope = std::min(rand_.friction * fn /
                                  std::max(vt_norm, cfg_.slip_velocity),
                              cfg_.friction_viscous_cap);
      Eigen::Vector3d ft = -slope * vt;
      Eigen::Vector3d f(ft.x(), ft.y(), fn);
      force += f;
      torque += (feet[leg] - com).cross(f);
    }
    update_contacts(feet);

    // Semi-implicit integration of the base.
    Eigen::Matrix3d r = rot.toRotationMatrix();
    Eigen::Matrix3d iw =
        r * cfg_.base_inertia.asDiagonal() * r.transpose();
    Eigen::Vector3d omega = state_.v.tail<3>();
    Eigen::Vector3d omega_dot =
        iw.ldlt().solve(torque - omega.cross(iw * omega));
    state_.v.head<3>() += dt * force / m;
    state_.v.tail<3>() += dt * omega_dot;
    const double speed = state_.v.head<3>().norm();
    if (speed > cfg_.max_base_speed) {
      state_.v.head<3>() *= cfg_.max_base_speed / speed;
    }
    const double spin = state_.v.tail<3>().norm();
    if (spin > cfg_.max_base_spin) {
      state_.v.tail<3>() *= cfg_.max_base_spin / spin;
    }
    state_.p += dt * state_.v.head<3>();

    omega = state_.v.tail<3>();
    const double angle = omega.norm() * dt;
    if (angle > 0.0) {
      Eigen::Quaterniond dq(Eigen::AngleAxisd(angle, omega.normalized()));
      Eigen::Quaterniond next = (dq * rot).normalized();
      state_.theta << next.w(), next.x(), next.y(), next.z();
    }

    state_.time += dt;
    proprio_log_.push_back(proprio_snapshot());
    while (proprio_log_.size() >
           static_cast<std::size_t>(cfg_.latency_substeps + 1)) {
      proprio_log_.pop_front();
    }
  }

  // One 50 Hz control step: 4 physics substeps under the PD target derived
  // from the action. A non-finite action faults the episode.
  RobotState step(const Vec& action) {
    if (action.size() != motion::kNumJoints) {
      throw std::invalid_argument("step: action must have 12 entries");
    }
    if (!action.allFinite()) {
      faulted_ = true;
      return state_;
    }
    Vec target = cfg_.action_is_offset ? Vec(nominal_pose_ + action) : action;
    for (int s = 0; s < cfg_.substeps; ++s) substep(target);
    if (!state_.p.allFinite() || !state_.theta.allFinite() ||
        !state_.v.allFinite() || !state_.q.allFinite() ||
        !state_.q_dot.allFinite()) {
      faulted_ = true;
    }
    push_history(action);
    last_action_ = action;
    return state_;
  }

  bool fallen() const {
    double ground = sample_height(terrain_, state_.p.x(), state_.p.y());
    return state_.p.z() - ground < cfg_.fall_height;
  }

  // Delayed proprioceptive block: base-frame linear velocity, angular
  // velocity, projected gravity.
  Vec observe_prop() const {
    const Vec& snap = proprio_log_.front();
    return snap.head(kPropDim);
  }

  Vec assemble_observation(const Vec& z_target_mean) const {
    Vec obs(observation_dim(cfg_.history_len, static_cast<int>(z_target_mean.size())));
    obs.head(kPropDim) = observe_prop();
    for (int h = 0; h < cfg_.history_len; ++h) {
      obs.segment(kPropDim + h * kHistoryFrameDim, kHistoryFrameDim) =
          history_[h];
    }
    obs.tail(z_target_mean.size()) = z_target_mean;
    return obs;
  }

  // Current state as a kinematic frame (world-frame velocities).
  motion::MotionFrame current_frame() const {
    motion::MotionFrame f;
    f.p = state_.p;
    f.theta = state_.theta;
    f.v = state_.v;
    f.q = state_.q;
    f.q_dot = state_.q_dot;
    return f;
  }

  std::array<Eigen::Vector3d, 4> foot_positions() const {
    const Eigen::Quaterniond rot(state_.theta(0), state_.theta(1),
                                 state_.theta(2), state_.theta(3));
    auto hips = cfg_.morphology.hip_positions();
    std::array<Eigen::Vector3d, 4> out;
    for (int leg = 0; leg < 4; ++leg) {
      Eigen::Vector3d local =
          hips[leg] + motion::leg_forward_kinematics(
                          cfg_.morphology, leg, state_.q(3 * leg),
                          state_.q(3 * leg + 1), state_.q(3 * leg + 2));
      out[leg] = state_.p + rot * local;
    }
    return out;
  }

  Eigen::Vector3d projected_gravity() const {
    const Eigen::Quaterniond rot(state_.theta(0), state_.theta(1),
                                 state_.theta(2), state_.theta(3));
    return rot.conjugate() * Eigen::Vector3d(0, 0, -1);
  }

  // Test hook: instantaneous velocity change (latency checks).
  void set_base_linear_velocity(const Eigen::Vector3d& v) {
    state_.v.head<3>() = v;
  }

 private:
  Vec proprio_snapshot() const {
    const Eigen::Quaterniond rot(state_.theta(0), state_.theta(1),
                                 state_.theta(2), state_.theta(3));
    Vec snap(kPropDim + 2 * motion::kNumJoints);
    snap.segment(0, 3) = rot.conjugate() * state_.v.head<3>();
    snap.segment(3, 3) = rot.conjugate() * state_.v.tail<3>();
    snap.segment(6, 3) = projected_gravity();
    snap.segment(9, motion::kNumJoints) = state_.q;
    snap.segment(9 + motion::kNumJoints, motion::kNumJoints) = state_.q_dot;
    return snap;
  }

  void push_history(const Vec& action) {
    const Vec& snap = proprio_log_.front();
    Vec entry(kHistoryFrameDim);
    entry.segment(0, 3) = snap.segment(6, 3);  // IMU: projected gravity
    entry.segment(3, 3) = snap.segment(3, 3);  // IMU: angular velocity
    entry.segment(6, motion::kNumJoints) = action;
    entry.segment(18, motion::kNumJoints) = snap.segment(9, motion::kNumJoints);
    entry.segment(30, motion::kNumJoints) =
        snap.segment(9 + motion::kNumJoints, motion::kNumJoints);
    history_.pop_front();
    history_.push_back(entry);
  }

  void clamp_joints() {
    auto limit = [&](int i, double lo, double hi) {
      if (state_.q(i) <= lo || state_.q(i) >= hi) {
        state_.q(i) = std::clamp(state_.q(i), lo, hi);
        state_.q_dot(i) = 0.0;  // hard stop
      }
    };
    for (int leg = 0; leg < 4; ++leg) {
      limit(3 * leg, -0.8, 0.8);
      limit(3 * leg + 1, -2.6, 2.6);
      limit(3 * leg + 2, -2.7, 0.0);
    }
  }

  void update_contacts(const std::array<Eigen::Vector3d, 4>& feet) {
    for (int leg = 0; leg < 4; ++leg) {
      state_.foot_contacts[leg] =
          sample_height(terrain_, feet[leg].x(), feet[leg].y()) >=
          feet[leg].z();
    }
  }

  EnvConfig cfg_;
  HeightField terrain_;
  DomainRandomization rand_;
  RobotState state_;
  Vec nominal_pose_;
  Vec last_action_ = Vec::Zero(motion::kNumJoints);
  bool faulted_ = false;
  std::array<Eigen::Vector3d, 4> prev_feet_;
  std::deque<Vec> history_;       // H frames, oldest first
  std::deque<Vec> proprio_log_;   // latency ring, front = delayed snapshot
};

}  // namespace lm::sim
