#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lincmdp/envmodel.hpp"
#include "lincmdp/estimate.hpp"
#include "lincmdp/linalg.hpp"
#include "lincmdp/policy.hpp"

namespace lincmdp {

struct StepRecord {
  int state = 0;
  int action = 0;
  double cost = 0.0;
  int next_state = 0;
};

struct EpisodeRecord {
  int k = 0;
  int epoch = 0;
  std::vector<StepRecord> trajectory;
  int loss_variant = 1;
  const StepParams* loss_params = nullptr;  // owned by the LinearCmdpSpec
  double v_f_hat = 0.0;                     // V_hat_{f,1}(s_1)
  double v_g_hat = 0.0;                     // V_hat_{g,1}(s_1)
  double dual = 0.0;                        // Y_k used in this episode
  bool mixed = false;
  bool reset = false;
};

struct BackwardResult {
  double v_f_hat = 0.0;
  double v_g_hat = 0.0;
  std::vector<Vector> w_f;  // theta_hat_f + psi_hat V_f, per step
  std::vector<Vector> w_g;
};

/// Soft-monitor counters. Hard bounds throw instead of counting.
struct MonitorStats {
  long dual_bound_violations = 0;  // Y > 11 eta H^3 K
  long q_checks = 0;
  long q_bound_violations = 0;  // |Q_hat_h| > 2 (H - h + 1)
  long optimism_checks = 0;
  long optimism_violations = 0;
  double max_dual = 0.0;
  double max_dual_step = 0.0;
};

struct LearnerOptions {
  /// Run the optimism check on every n-th episode (0 disables it). Checked
  /// episodes evaluate value estimates on every state instead of only the
  /// observed ones.
  int optimism_check_every = 0;
};

/// [(1 - 4 alpha eta H^3) Y + eta (v_g_hat - b - 4 alpha H^3 - 4 theta H^2)]_+
double dual_update(double dual, double v_g_hat, double budget, const HyperParams& hp);

/// Largest allowed |Y_{k+1} - Y_k|: 44 eta^2 alpha H^6 K + 3 eta H + 4 eta alpha H^3 + 4 eta theta H^2.
double dual_step_bound(const HyperParams& hp);

/// 11 eta H^3 K.
double dual_value_bound(const HyperParams& hp);

/// (3/2) d H ln(2K).
double epoch_count_bound(int dim, int horizon, int num_episodes);

/// The primal-dual policy optimization learner. One instance per run; not
/// thread safe.
class Learner {
 public:
  using Observer = std::function<void(const Learner&, const EpisodeRecord&)>;

  Learner(const LinearCmdpSpec& spec, HyperParams hp, std::uint64_t seed, LearnerOptions options = {});

  /// Starts a new epoch when k = 1 or some step's design determinant doubled
  /// since the anchor. Returns whether a reset happened.
  bool maybe_start_epoch(int k);

  /// Plays episode k with the current policy.
  EpisodeRecord rollout(int k);

  /// Optimistic estimates for episode k from data of episodes < k.
  BackwardResult backward_pass(int k, const EpisodeRecord& record);

  /// Mixing mark, policy update, dual update, then folds episode k's data into
  /// the design matrices and regression targets.
  void finish_episode(const EpisodeRecord& record, const BackwardResult& estimates);

  /// One full episode. The observer sees the deployed policy pi^k after the
  /// backward pass and before the policy update.
  EpisodeRecord step(const Observer& observer = {});

  std::vector<EpisodeRecord> run(int num_episodes, const Observer& observer = {});

  const LinearCmdpSpec& spec() const { return spec_; }
  const HyperParams& hyper() const { return hp_; }
  const EpochPolicy& policy() const { return policy_; }
  const EpochFeatureCache& feature_cache() const { return cache_; }
  const DesignMatrix& design(int h) const { return designs_[static_cast<size_t>(h)]; }
  const RegressionAccumulator& accumulator() const { return accumulator_; }
  const MonitorStats& monitors() const { return monitors_; }
  double dual() const { return dual_; }
  int epoch() const { return epoch_; }
  int anchor_episode() const { return anchor_episode_; }
  int episode() const { return episode_; }

  /// Deployed policy pi_h(. | s).
  std::span<const double> policy_at(int h, int s) const { return policy_.evaluate(h, s, cache_); }

 private:
  const LinearCmdpSpec& spec_;
  HyperParams hp_;
  LearnerOptions options_;
  std::vector<DesignMatrix> designs_;
  RegressionAccumulator accumulator_;
  EpochFeatureCache cache_;
  EpochPolicy policy_;
  double dual_ = 0.0;
  int epoch_ = 0;
  int anchor_episode_ = 0;
  int episode_ = 0;
  double epoch_bound_;
  double dual_step_bound_;
  double dual_value_bound_;
  RngStream action_rng_;
  RngStream transition_rng_;
  RngStream loss_rng_;
  RngStream cost_rng_;
  MonitorStats monitors_;
};

}  // namespace lincmdp
