#pragma once

#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lincmdp/common.hpp"
#include "lincmdp/estimate.hpp"

namespace lincmdp {

/// One run of episodes between mixing boundaries. The log-weight it adds at
/// (s, a) is phi_bar^T W + B nu_bar, i.e. -alpha sum_j (Q_f^j + Y_j Q_g^j).
struct PolicySegment {
  Vector W;
  double B = 0.0;
  bool mixed_before = false;  // mix with uniform before applying this segment
};

/// Weighted-LogSumExp softmax policy of the current epoch, stored as
/// segments per step and folded on demand:
///   pi <- uniform; for each segment: [pi <- (1-theta) pi + theta u]; pi <- pi exp(seg) / Z.
class EpochPolicy {
 public:
  EpochPolicy(int horizon, int num_states, int num_actions, int dim, double theta);

  int horizon() const { return horizon_; }
  int num_actions() const { return num_actions_; }
  double theta() const { return theta_; }

  /// Clears all segments; the policy becomes uniform everywhere.
  void reset_epoch();

  /// open.W += -alpha (w_f + Y w_g); open.B += alpha beta_b (1 + Y).
  void append_episode(int h, const Vector& w_f, const Vector& w_g, double dual, double alpha, double beta_b);

  /// Closes the open segment; the next one is applied after mixing.
  void mark_mixing(int h);

  const std::vector<PolicySegment>& closed_segments(int h) const { return steps_[static_cast<size_t>(h)].closed; }
  const PolicySegment& open_segment(int h) const { return steps_[static_cast<size_t>(h)].open; }

  /// pi_h(. | s) under the contracted features of `anchor`. Results are
  /// memoized until the step's segments change; not safe for concurrent use.
  std::span<const double> evaluate(int h, int s, const EpochFeatureCache& anchor) const;

  /// Same fold without touching the memo table.
  void evaluate_uncached(int h, int s, const EpochFeatureCache& anchor, std::span<double> out) const;

  /// {epoch, anchor_episode, theta, steps: [{segments: [...]}], anchor: {...}}.
  nlohmann::json snapshot(const EpochFeatureCache& anchor, int epoch, int anchor_episode) const;

  /// Inverse of snapshot(); throws ConfigError on malformed input.
  static std::pair<EpochPolicy, EpochFeatureCache> from_snapshot(const nlohmann::json& snap);

 private:
  struct Step {
    std::vector<PolicySegment> closed;
    PolicySegment open;
    mutable std::vector<double> memo;      // [s][a]
    mutable std::vector<char> memo_valid;  // [s]
  };

  void invalidate(Step& step) const;

  int horizon_;
  int num_states_;
  int num_actions_;
  int dim_;
  double theta_;
  std::vector<Step> steps_;
};

}  // namespace lincmdp
