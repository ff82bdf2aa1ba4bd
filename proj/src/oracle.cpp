#include "lincmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lincmdp {

namespace {

constexpr double kLambdaTol = 1e-6;
constexpr double kFeasibilityTol = 1e-12;

StepParams combine(const StepParams& f, const StepParams& g, double lambda) {
  StepParams out;
  out.reserve(f.size());
  for (size_t h = 0; h < f.size(); ++h) out.push_back(f[h] + lambda * g[h]);
  return out;
}

}  // namespace

ValueTable dp_policy_value(const LinearCmdpSpec& spec, const PolicyFn& policy, const StepParams& reward) {
  const int H = spec.horizon();
  const int S = spec.num_states();
  const int A = spec.num_actions();
  ValueTable table{H, S, std::vector<double>(static_cast<size_t>((H + 1) * S), 0.0)};
  std::vector<double> pi(static_cast<size_t>(A));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      policy(h, s, pi);
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        const double p = pi[static_cast<size_t>(a)];
        if (p == 0.0) continue;
        double q = spec.loss(reward, h, s, a);
        const auto row = spec.transition_row(h, s, a);
        for (int sp = 0; sp < S; ++sp) q += row[static_cast<size_t>(sp)] * table.at(h + 1, sp);
        v += p * q;
      }
      table.at(h, s) = v;
    }
  }
  return table;
}

DpMinimum dp_minimize(const LinearCmdpSpec& spec, const StepParams& reward) {
  const int H = spec.horizon();
  const int S = spec.num_states();
  const int A = spec.num_actions();
  DpMinimum out{{H, S, std::vector<double>(static_cast<size_t>((H + 1) * S), 0.0)},
                std::vector<int>(static_cast<size_t>(H * S), 0)};
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      int best_a = -1;
      for (int a = 0; a < A; ++a) {
        double q = spec.loss(reward, h, s, a);
        const auto row = spec.transition_row(h, s, a);
        for (int sp = 0; sp < S; ++sp) q += row[static_cast<size_t>(sp)] * out.values.at(h + 1, sp);
        if (best_a < 0 || q < best) {
          best = q;
          best_a = a;
        }
      }
      out.values.at(h, s) = best;
      out.actions[static_cast<size_t>(h * S + s)] = best_a;
    }
  }
  return out;
}

StepParams average_params(std::span<const StepParams* const> params) {
  require(!params.empty(), "average_params: empty sequence");
  StepParams avg = *params.front();
  for (Vector& v : avg) v.setZero();
  for (const StepParams* p : params)
    for (size_t h = 0; h < avg.size(); ++h) avg[h] += (*p)[h];
  for (Vector& v : avg) v /= static_cast<double>(params.size());
  return avg;
}

DualPoint dual_function(const LinearCmdpSpec& spec, const StepParams& loss, double budget, double lambda) {
  const DpMinimum best = dp_minimize(spec, combine(loss, spec.theta_g(), lambda));
  const int S = spec.num_states();
  const PolicyFn greedy = [&](int h, int s, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<size_t>(best.actions[static_cast<size_t>(h * S + s)])] = 1.0;
  };
  const double v_g = dp_policy_value(spec, greedy, spec.theta_g()).at(0, spec.initial_state());
  return {lambda, best.values.at(0, spec.initial_state()) - lambda * budget, v_g - budget};
}

double slater_margin(const LinearCmdpSpec& spec, double budget) {
  return budget - dp_minimize(spec, spec.theta_g()).values.at(0, spec.initial_state());
}

ConstrainedOptimum constrained_optimum(const LinearCmdpSpec& spec, const StepParams& avg_loss, double budget) {
  ConstrainedOptimum out;
  out.min_cost = dp_minimize(spec, spec.theta_g()).values.at(0, spec.initial_state());
  out.slater_gamma = budget - out.min_cost;
  if (out.min_cost > budget + kFeasibilityTol) {
    std::ostringstream msg;
    msg << "constraint infeasible: min_pi V_g = " << out.min_cost << " > b = " << budget;
    throw InfeasibleInstance(msg.str());
  }

  const DualPoint at_zero = dual_function(spec, avg_loss, budget, 0.0);
  if (at_zero.cost_gap <= 0.0) {
    out.value = at_zero.value;
    out.lambda_star = 0.0;
    return out;
  }

  const double H = spec.horizon();
  double hi = out.slater_gamma > 0.0 ? 2.0 * H / out.slater_gamma : 2.0 * H;
  DualPoint upper = dual_function(spec, avg_loss, budget, hi);
  for (int i = 0; upper.cost_gap > 0.0 && i < 200; ++i) {
    hi *= 2.0;
    upper = dual_function(spec, avg_loss, budget, hi);
  }
  double lo = 0.0;
  DualPoint lower = at_zero;
  while (hi - lo > kLambdaTol) {
    const double mid = 0.5 * (lo + hi);
    const DualPoint p = dual_function(spec, avg_loss, budget, mid);
    if (p.cost_gap > 0.0) {
      lo = mid;
      lower = p;
    } else {
      hi = mid;
      upper = p;
    }
  }
  // d is concave and piecewise linear with slopes bounded by H, so both
  // bracket ends are within H * 1e-6 of the maximum. When the bracket holds a
  // single kink, the supporting lines at its ends meet exactly at the maximum.
  out.value = std::max(lower.value, upper.value);
  out.lambda_star = lower.value >= upper.value ? lower.lambda : upper.lambda;
  const double slope_drop = lower.cost_gap - upper.cost_gap;
  if (slope_drop > 0.0) {
    const double x = (upper.value - lower.value + lower.lambda * lower.cost_gap - upper.lambda * upper.cost_gap) /
                     slope_drop;
    if (x >= lower.lambda && x <= upper.lambda) {
      const double at_kink = lower.value + (x - lower.lambda) * lower.cost_gap;
      if (at_kink >= out.value && at_kink - out.value <= H * (hi - lo)) {
        out.value = at_kink;
        out.lambda_star = x;
      }
    }
  }
  return out;
}

}  // namespace lincmdp
