#pragma once

#include <cstdint>
#include <random>

namespace lm::sim {

// Per-reset physical randomization. Ranges follow the training setup:
// friction [0.5, 1.25], added base mass [-1, 1] kg, COM displacement
// [-0.15, 0.15] m, motor strength [0.9, 1.1], Kp factor [0.8, 1.3],
// Kd factor [0.5, 1.3], observation latency fixed at 0.03 s.
struct DomainRandomization {
  double friction = 1.0;
  double added_mass = 0.0;       // kg
  double com_displacement = 0.0; // m, along base x
  double motor_strength = 1.0;
  double kp_factor = 1.0;
  double kd_factor = 1.0;
  double observation_latency = 0.03;  // s
};

inline DomainRandomization randomize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  DomainRandomization d;
  d.friction = u(0.5, 1.25);
  d.added_mass = u(-1.0, 1.0);
  d.com_displacement = u(-0.15, 0.15);
  d.motor_strength = u(0.9, 1.1);
  d.kp_factor = u(0.8, 1.3);
  d.kd_factor = u(0.5, 1.3);
  d.observation_latency = 0.03;
  return d;
}

}  // namespace lm::sim
