#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace lm::train {

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

// Generalized advantage estimation over one environment's step sequence.
// `bootstrap_value` is V(s_T) for a non-terminal tail; terminal steps cut
// bootstrapping.
inline GaeResult compute_gae(const Eigen::VectorXd& rewards,
                             const Eigen::VectorXd& values,
                             const std::vector<bool>& dones,
                             double bootstrap_value, double gamma,
                             double lambda) {
  const auto n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw std::invalid_argument("compute_gae: length mismatch");
  }
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double gae = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_v = (t == n - 1) ? bootstrap_value : values(t + 1);
    const double delta = rewards(t) + gamma * next_v * not_done - values(t);
    gae = delta + gamma * lambda * not_done * gae;
    out.advantages(t) = gae;
    out.returns(t) = gae + values(t);
  }
  return out;
}

}  // namespace lm::train
