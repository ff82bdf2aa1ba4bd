#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lincmdp/learner.hpp"
#include "lincmdp/oracle.hpp"

namespace lincmdp {

/// Exact per-episode values of the deployed policy plus learner state.
struct EpisodeMetrics {
  int k = 0;
  int epoch = 0;
  double dual = 0.0;
  double v_f_hat = 0.0;
  double v_g_hat = 0.0;
  double v_f_true = 0.0;  // V_{f^k,1}^{pi^k}(s_1)
  double v_g_true = 0.0;  // V_{g,1}^{pi^k}(s_1)
  bool mixed = false;
  bool reset = false;
};

struct RunSummary {
  int episodes = 0;
  std::optional<double> v_star;
  std::optional<double> final_regret;
  std::optional<double> regret_slope;  // log-log fit over k in [K/2, K]
  double final_violation = 0.0;
  std::vector<double> window_violation_mean;  // mean of V_g - b over 10 equal windows
  double final_tenth_violation_mean = 0.0;
  double max_dual = 0.0;
  int epochs = 0;

  nlohmann::json to_json() const;
};

/// Fixed column order of the per-episode CSV.
inline constexpr const char* kEpisodeCsvHeader =
    "k,epoch,Y,v_f_hat,v_g_hat,v_f_true,v_g_true,cum_regret,cum_violation,mixed_flag,reset_flag";

class RunMetrics {
 public:
  explicit RunMetrics(double budget) : budget_(budget) {}

  /// Evaluates the deployed policy exactly under the episode's loss and the
  /// mean cost, and appends a row.
  void record_episode(const LinearCmdpSpec& spec, const PolicyFn& policy, const EpisodeRecord& record);

  void append(const EpisodeMetrics& row) { rows_.push_back(row); }

  const std::vector<EpisodeMetrics>& rows() const { return rows_; }
  double budget() const { return budget_; }

  /// Prefix sums of v_f_true - v_star.
  std::vector<double> cumulative_regret(double v_star) const;

  /// [prefix sums of v_g_true - b]_+.
  std::vector<double> cumulative_violation() const;

  /// One row per episode; without v_star the cum_regret column is dropped.
  void write_csv(std::ostream& out, std::optional<double> v_star) const;

  RunSummary finalize(std::optional<double> v_star) const;

 private:
  double budget_;
  std::vector<EpisodeMetrics> rows_;
};

/// Least-squares slope of log(curve[k-1]) against log k over k in
/// [ceil(n/2), n], using only positive entries. Empty if fewer than two.
std::optional<double> second_half_loglog_slope(std::span<const double> curve);

/// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace lincmdp
