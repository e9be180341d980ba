#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lm::prior {

// Exact decomposition of a full-space KL divergence through a stochastic
// channel q(z|x): with shared channel,
//   KL(P_ref(X) || P_pi(X)) = KL(P_ref(Z) || P_pi(Z))
//                             + E_{z ~ P_ref(Z)} KL(P_ref(X|Z) || P_pi(X|Z)).
// The first term is the marginal latent divergence, the second the
// conditional geometric divergence; the marginal never exceeds the total.
struct DivergenceDecomposition {
  double total = 0.0;
  double marginal = 0.0;
  double conditional = 0.0;
  bool infinite = false;  // support violation: p_ref > 0 where p_pi = 0
};

inline DivergenceDecomposition verify_decomposition(
    const Eigen::VectorXd& p_ref, const Eigen::VectorXd& p_pi,
    const Eigen::MatrixXd& channel /* |Z| x |X|, columns sum to 1 */) {
  const auto nx = p_ref.size();
  const auto nz = channel.rows();
  if (p_pi.size() != nx || channel.cols() != nx) {
    throw std::invalid_argument("verify_decomposition: size mismatch");
  }

  DivergenceDecomposition out;
  const double inf = std::numeric_limits<double>::infinity();

  // Total: KL over X.
  for (Eigen::Index x = 0; x < nx; ++x) {
    if (p_ref(x) <= 0.0) continue;
    if (p_pi(x) <= 0.0) {
      out.infinite = true;
      out.total = out.marginal = out.conditional = inf;
      return out;
    }
    out.total += p_ref(x) * std::log(p_ref(x) / p_pi(x));
  }

  // Marginals over Z.
  Eigen::VectorXd zr = channel * p_ref;
  Eigen::VectorXd zp = channel * p_pi;
  for (Eigen::Index z = 0; z < nz; ++z) {
    if (zr(z) <= 0.0) continue;
    out.marginal += zr(z) * std::log(zr(z) / zp(z));
  }

  // Conditional: E_{z ~ zr} KL(P_ref(X|z) || P_pi(X|z)), via the joints
  // p(x,z) = p(x) q(z|x).
  for (Eigen::Index z = 0; z < nz; ++z) {
    if (zr(z) <= 0.0) continue;
    for (Eigen::Index x = 0; x < nx; ++x) {
      const double jr = p_ref(x) * channel(z, x);
      if (jr <= 0.0) continue;
      const double jp = p_pi(x) * channel(z, x);
      const double cr = jr / zr(z);
      const double cp = jp / zp(z);
      out.conditional += zr(z) * cr * std::log(cr / cp);
    }
  }
  return out;
}

}  // namespace lm::prior
