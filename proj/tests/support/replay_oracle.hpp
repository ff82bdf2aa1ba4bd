#pragma once

// Literal episode-by-episode execution of the mix-then-exponentiate policy
// update. Used only to check the segment representation.

#include <cmath>
#include <vector>

#include "lincmdp/estimate.hpp"

namespace lincmdp::test_support {

struct ReplayEpisode {
  Vector w_f;
  Vector w_g;
  double dual = 0.0;
  bool mixed = false;
};

inline std::vector<double> evaluate_by_replay(const std::vector<ReplayEpisode>& log, int h, int s,
                                              const EpochFeatureCache& anchor, int num_actions, double theta,
                                              double alpha, double beta_b) {
  std::vector<double> p(static_cast<size_t>(num_actions), 1.0 / num_actions);
  for (const ReplayEpisode& ep : log) {
    if (ep.mixed)
      for (double& x : p) x = (1.0 - theta) * x + theta / num_actions;
    double z = 0.0;
    for (int a = 0; a < num_actions; ++a) {
      const ContractedFeature& f = anchor.at(h, s, a);
      const double q_f = f.phi_bar.dot(ep.w_f) - beta_b * f.sigma * f.nu;
      const double q_g = f.phi_bar.dot(ep.w_g) - beta_b * f.sigma * f.nu;
      p[static_cast<size_t>(a)] *= std::exp(-alpha * (q_f + ep.dual * q_g));
      z += p[static_cast<size_t>(a)];
    }
    for (double& x : p) x /= z;
  }
  return p;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

}  // namespace lincmdp::test_support
