#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lincmdp/envmodel.hpp"

namespace lincmdp {

/// Fills out[a] = pi_h(a | s).
using PolicyFn = std::function<void(int h, int s, std::span<double> out)>;

/// V_h(s) for h = 0..H (V_H = 0), exact.
struct ValueTable {
  int horizon = 0;
  int num_states = 0;
  std::vector<double> values;  // [h][s]

  double at(int h, int s) const { return values[static_cast<size_t>(h * num_states + s)]; }
  double& at(int h, int s) { return values[static_cast<size_t>(h * num_states + s)]; }
};

/// Per-step reward parameters: r_h(s, a) = phi(s, a)^T params[h].
ValueTable dp_policy_value(const LinearCmdpSpec& spec, const PolicyFn& policy, const StepParams& reward);

/// Deterministic minimizer of the cumulative reward. Ties go to the lowest
/// action index.
struct DpMinimum {
  ValueTable values;
  std::vector<int> actions;  // [h][s]
};
DpMinimum dp_minimize(const LinearCmdpSpec& spec, const StepParams& reward);

/// Cumulative mean cost parameters theta_{g,.}.
inline const StepParams& cost_params(const LinearCmdpSpec& spec) { return spec.theta_g(); }

/// Episode average (1/n) sum of loss parameter sequences.
StepParams average_params(std::span<const StepParams* const> params);

struct DualPoint {
  double lambda = 0.0;
  double value = 0.0;     // d(lambda) = min_pi V_{f + lambda g} - lambda b
  double cost_gap = 0.0;  // V_g^{pi_lambda}(s_1) - b, a supergradient of d
};

/// Lagrangian dual function at lambda.
DualPoint dual_function(const LinearCmdpSpec& spec, const StepParams& loss, double budget, double lambda);

struct ConstrainedOptimum {
  double value = 0.0;         // V*
  double lambda_star = 0.0;   // optimal multiplier
  double slater_gamma = 0.0;  // b - min_pi V_g
  double min_cost = 0.0;      // min_pi V_g(s_1)
};

/// min_pi V_f(s_1) s.t. V_g(s_1) <= b through bisection on the concave dual.
/// Throws InfeasibleInstance when min_pi V_g(s_1) > b.
ConstrainedOptimum constrained_optimum(const LinearCmdpSpec& spec, const StepParams& avg_loss, double budget);

/// b - min_pi V_g(s_1). Non-positive values mean no Slater policy exists.
double slater_margin(const LinearCmdpSpec& spec, double budget);

}  // namespace lincmdp
