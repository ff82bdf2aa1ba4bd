#pragma once

// Constrained optimum by exhaustive search: every deterministic Markov policy
// is scored by summing over all trajectories, and every pair of policies is
// mixed at trajectory level on a 1e-3 weight grid plus the exact weight that
// makes the constraint tight.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lincmdp/envmodel.hpp"

namespace lincmdp::test_support {

struct PolicyScore {
  double loss = 0.0;
  double cost = 0.0;
};

inline void accumulate_paths(const LinearCmdpSpec& spec, const StepParams& loss, const std::vector<int>& actions, int h,
                             int s, double prob, PolicyScore& score) {
  if (h == spec.horizon() || prob == 0.0) return;
  const int a = actions[static_cast<size_t>(h * spec.num_states() + s)];
  score.loss += prob * spec.loss(loss, h, s, a);
  score.cost += prob * spec.mean_cost(h, s, a);
  const auto row = spec.transition_row(h, s, a);
  for (int sp = 0; sp < spec.num_states(); ++sp)
    accumulate_paths(spec, loss, actions, h + 1, sp, prob * row[static_cast<size_t>(sp)], score);
}

inline std::vector<PolicyScore> score_all_deterministic(const LinearCmdpSpec& spec, const StepParams& loss) {
  const int cells = spec.horizon() * spec.num_states();
  std::vector<int> actions(static_cast<size_t>(cells), 0);
  std::vector<PolicyScore> out;
  while (true) {
    PolicyScore score;
    accumulate_paths(spec, loss, actions, 0, spec.initial_state(), 1.0, score);
    out.push_back(score);
    int i = 0;
    while (i < cells && ++actions[static_cast<size_t>(i)] == spec.num_actions()) actions[static_cast<size_t>(i++)] = 0;
    if (i == cells) break;
  }
  return out;
}

/// Empty when no mixture meets the budget.
inline std::optional<double> brute_force_optimum(const LinearCmdpSpec& spec, const StepParams& loss, double budget) {
  const auto scores = score_all_deterministic(spec, loss);
  double best = std::numeric_limits<double>::infinity();
  auto consider = [&](const PolicyScore& p, const PolicyScore& q, double w) {
    const double cost = w * p.cost + (1 - w) * q.cost;
    if (cost <= budget + 1e-12) best = std::min(best, w * p.loss + (1 - w) * q.loss);
  };
  for (const auto& p : scores) {
    for (const auto& q : scores) {
      for (int i = 0; i <= 1000; ++i) consider(p, q, i / 1000.0);
      if (p.cost != q.cost) {
        const double w = (budget - q.cost) / (p.cost - q.cost);
        if (w >= 0.0 && w <= 1.0) consider(p, q, w);
      }
    }
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

}  // namespace lincmdp::test_support
