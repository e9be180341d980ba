#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace lm::prior {

using Vec = Eigen::VectorXd;

// Diagonal gaussian over the latent space.
struct LatentGaussian {
  Vec mean;
  Vec std;

  int dim() const { return static_cast<int>(mean.size()); }
};

// KL(a || b) for diagonal gaussians:
//   sum_i [ ln(sb/sa) + (sa^2 + (ma - mb)^2) / (2 sb^2) - 1/2 ]
inline double gaussian_kl(const LatentGaussian& a, const LatentGaussian& b) {
  if (a.mean.size() != a.std.size() || b.mean.size() != b.std.size() ||
      a.mean.size() != b.mean.size()) {
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  }
  if ((a.std.array() <= 0.0).any() || (b.std.array() <= 0.0).any()) {
    throw std::invalid_argument("gaussian_kl: non-positive std");
  }
  const auto& sa = a.std.array();
  const auto& sb = b.std.array();
  const auto dm = (a.mean - b.mean).array();
  return ((sb / sa).log() + (sa.square() + dm.square()) / (2.0 * sb.square()) -
          0.5)
      .sum();
}

inline double symmetric_gaussian_kl(const LatentGaussian& a,
                                    const LatentGaussian& b) {
  return 0.5 * (gaussian_kl(a, b) + gaussian_kl(b, a));
}

// Log-density of a diagonal gaussian at x.
inline double gaussian_log_prob(const LatentGaussian& g, const Vec& x) {
  if (x.size() != g.mean.size()) {
    throw std::invalid_argument("gaussian_log_prob: dimension mismatch");
  }
  const double d = static_cast<double>(x.size());
  const auto z = ((x - g.mean).array() / g.std.array());
  return -0.5 * z.square().sum() - g.std.array().log().sum() -
         0.5 * d * std::log(2.0 * M_PI);
}

}  // namespace lm::prior
