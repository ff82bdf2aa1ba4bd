#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lincmdp/common.hpp"

namespace lincmdp {

/// Feature vectors phi(s, a) stored row-major by (state, action).
struct FeatureMap {
  int num_states = 0;
  int num_actions = 0;
  int dim = 0;
  std::vector<Vector> table;

  const Vector& operator()(int s, int a) const { return table[static_cast<size_t>(s * num_actions + a)]; }
  bool is_one_hot() const;
};

/// One-hot featurization with d = |S||A|; phi(s, a) = e_{s|A| + a}.
FeatureMap tabular_features(int num_states, int num_actions);

/// Per-step loss parameters theta_{f,h}, h = 0..H-1.
using StepParams = std::vector<Vector>;

/// The adversary: either a fixed loss or the two-function drift where f1 is
/// chosen at episode k with probability 0.9 - 0.9 (k-1)/(K-1).
class LossSchedule {
 public:
  enum class Variant { Fixed, TwoFunctionDrift };

  struct Draw {
    int which = 1;  // 1 or 2
    const StepParams* params = nullptr;
  };

  static LossSchedule fixed(StepParams f);
  static LossSchedule two_function_drift(StepParams f1, StepParams f2, int num_episodes);

  Variant variant() const { return variant_; }
  int num_episodes() const { return num_episodes_; }
  const StepParams& first() const { return f1_; }
  const StepParams& second() const { return f2_; }

  /// Probability of f1 at episode k (1-based).
  double first_probability(int k) const;

  /// Samples theta_{f,.}^k. Consumes exactly one uniform draw for the drift
  /// variant and none for the fixed one.
  Draw draw(int k, RngStream& rng) const;

 private:
  Variant variant_ = Variant::Fixed;
  StepParams f1_;
  StepParams f2_;
  int num_episodes_ = 1;
};

/// How the bandit cost sample g_h^k is generated.
enum class CostRule {
  JobProgress,    // g = 1 - (s - s') / 2, randomness through s'
  Bernoulli,      // g ~ Bernoulli(phi^T theta_g)
  Deterministic,  // g = phi^T theta_g
};

/// Finite-horizon linear CMDP with known features. Steps are 0-based inside
/// the library (h = 0 .. H-1); configs use the same convention except for the
/// job-scheduling preset, whose loss tables are written for steps 1..H.
class LinearCmdpSpec {
 public:
  struct Parts {
    int horizon = 0;
    FeatureMap features;
    std::vector<std::vector<Vector>> psi;  // [h][s'] in R^d
    StepParams theta_g;
    CostRule cost_rule = CostRule::Deterministic;
    LossSchedule losses;
    double budget = 0.0;
    int initial_state = 0;
  };

  /// Validates every structural invariant; throws ConfigError on failure.
  explicit LinearCmdpSpec(Parts parts);

  int horizon() const { return horizon_; }
  int num_states() const { return features_.num_states; }
  int num_actions() const { return features_.num_actions; }
  int dim() const { return features_.dim; }
  double budget() const { return budget_; }
  int initial_state() const { return initial_state_; }
  CostRule cost_rule() const { return cost_rule_; }
  const FeatureMap& features() const { return features_; }
  const Vector& phi(int s, int a) const { return features_(s, a); }
  const std::vector<Vector>& psi(int h) const { return psi_[static_cast<size_t>(h)]; }
  const StepParams& theta_g() const { return theta_g_; }
  const LossSchedule& losses() const { return losses_; }

  /// P_h(. | s, a) as a dense row over next states.
  std::span<const double> transition_row(int h, int s, int a) const;

  int sample_transition(int h, int s, int a, RngStream& rng) const;
  double sample_cost(int h, int s, int a, int next_state, RngStream& rng) const;
  double mean_cost(int h, int s, int a) const;
  double loss(const StepParams& params, int h, int s, int a) const { return phi(s, a).dot(params[static_cast<size_t>(h)]); }

  /// A copy with a different budget.
  LinearCmdpSpec with_budget(double budget) const;

 private:
  int horizon_;
  FeatureMap features_;
  std::vector<std::vector<Vector>> psi_;
  StepParams theta_g_;
  CostRule cost_rule_;
  LossSchedule losses_;
  double budget_;
  int initial_state_;
  std::vector<double> rows_;  // [h][s][a][s']
};

/// Samples from a categorical distribution given by `probs` using one uniform draw.
int sample_categorical(std::span<const double> probs, RngStream& rng);

/// Job-scheduling transition kernel: action 1 removes two jobs with prob
/// p_two, one with p_one, none otherwise (clipped at zero); action 0 idles.
std::vector<double> job_transition_row(int num_states, int s, int a, double p_two, double p_one);

inline constexpr const char* kJobSchedulingPreset = "job-scheduling-v1";

/// Built-in environment configuration for the job-scheduling instance.
nlohmann::json job_scheduling_config();

/// Builds a spec from an environment config (or a preset id string).
/// `num_episodes` parameterizes the drift schedule. Throws ConfigError.
LinearCmdpSpec load_environment(const nlohmann::json& config, int num_episodes);

}  // namespace lincmdp
