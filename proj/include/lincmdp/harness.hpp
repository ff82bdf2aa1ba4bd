#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lincmdp/envmodel.hpp"
#include "lincmdp/estimate.hpp"
#include "lincmdp/learner.hpp"
#include "lincmdp/metrics.hpp"
#include "lincmdp/oracle.hpp"

namespace lincmdp {

/// CLI exit codes.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitInfeasible = 3 };

struct HyperOverrides {
  std::optional<double> alpha;
  std::optional<double> eta;
  std::optional<double> theta;
  std::optional<double> beta_b;
  std::optional<double> beta_w;
  std::optional<int> mixing_period;
};

struct ExperimentConfig {
  nlohmann::json environment = kJobSchedulingPreset;
  int K = 1;
  std::vector<std::uint64_t> seeds;
  std::string preset = "paper-fig1";  // or "theory"
  double delta = 0.1;
  HyperOverrides overrides;
  std::filesystem::path output_dir = "out";
  int parallel = 1;
  int optimism_check_every = 0;
};

/// Parses and type-checks an experiment config; throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The job-scheduling reproduction: K = 100000, seeds 1..10, preset paper-fig1.
ExperimentConfig paper_fig1_experiment();

/// Preset wiring followed by explicit overrides, validated.
HyperParams effective_hyperparams(const ExperimentConfig& config, const LinearCmdpSpec& spec);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  int exit_code = kExitOk;
  std::string error;
  std::vector<EpisodeMetrics> rows;
  std::optional<ConstrainedOptimum> optimum;
  RunSummary summary;
  MonitorStats monitors;
  double seconds = 0.0;
};

/// One learner run with exact per-episode evaluation and V* from the
/// realized average loss. Never throws; failures are reported in the result.
SeedResult run_seed(const LinearCmdpSpec& spec, const HyperParams& hp, std::uint64_t seed,
                    LearnerOptions options = {});

/// Per-episode mean and normal 95% band (mean +- 1.96 sd / sqrt(n)) over
/// completed seeds.
struct AggregateCurves {
  int num_seeds = 0;
  bool has_regret = false;
  std::vector<double> regret_mean, regret_lo, regret_hi;
  std::vector<double> violation_mean, violation_lo, violation_hi;
  std::vector<double> step_violation_mean;  // mean of V_g^{pi^k} - b
};

AggregateCurves aggregate_runs(const std::vector<SeedResult>& results, double budget);

inline constexpr const char* kAggregateCsvHeader =
    "k,n,cum_regret_mean,cum_regret_lo,cum_regret_hi,cum_violation_mean,cum_violation_lo,cum_violation_hi,"
    "step_violation_mean";

void write_aggregate_csv(std::ostream& out, const AggregateCurves& agg);

struct ExperimentResult {
  HyperParams hyper;
  std::vector<SeedResult> seeds;
  AggregateCurves aggregate;
  double budget = 0.0;
  int exit_code = kExitOk;
};

/// Runs every seed (up to `parallel` at once) and, if `write_files`, writes
/// seed_<s>.csv, aggregate.csv and summary.json into the output directory.
ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files = true);

/// Standalone matplotlib script rendering regret and violation with CI bands.
std::string plot_script(const std::filesystem::path& aggregate_csv);

/// Writes plot_script() next to the aggregate (or to `script_path`). Throws
/// ConfigError when the aggregate file is missing.
std::filesystem::path emit_plot_script(const std::filesystem::path& aggregate_csv,
                                       std::optional<std::filesystem::path> script_path = std::nullopt);

struct ValidationReport {
  bool ok = true;
  int exit_code = kExitOk;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::optional<double> slater_gamma;
  std::optional<HyperParams> hyper;
  std::string table;
};

ValidationReport validate_config(const ExperimentConfig& config);

}  // namespace lincmdp
