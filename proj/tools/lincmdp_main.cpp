// Command-line front end: run / validate / plot.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lincmdp/harness.hpp"

using namespace lincmdp;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir, int parallel) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (parallel > 0) cfg.parallel = parallel;
  const ValidationReport report = validate_config(cfg);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  if (!report.ok) {
    for (const auto& e : report.errors) std::cerr << "error: " << e << '\n';
    return report.exit_code;
  }
  const ExperimentResult result = run_experiment(cfg);
  for (const auto& seed : result.seeds) {
    if (seed.ok) {
      std::cout << "seed " << seed.seed << ": regret " << format_number(seed.summary.final_regret.value_or(0.0))
                << ", violation " << format_number(seed.summary.final_violation) << ", epochs "
                << seed.summary.epochs << " (" << seed.seconds << " s)\n";
    } else {
      std::cerr << "seed " << seed.seed << " failed: " << seed.error << '\n';
    }
  }
  std::cout << "wrote " << (cfg.output_dir / "aggregate.csv").string() << " over " << result.aggregate.num_seeds
            << " seed(s)\n";
  return result.exit_code;
}

int cmd_validate(const std::string& config_path) {
  const ValidationReport report = validate_config(load_experiment_config(config_path));
  std::cout << report.table;
  for (const auto& w : report.warnings) std::cout << "warning: " << w << '\n';
  for (const auto& e : report.errors) std::cout << "error: " << e << '\n';
  std::cout << (report.ok ? "valid" : "invalid") << '\n';
  return report.exit_code;
}

int cmd_plot(const std::string& aggregate, const std::string& script) {
  const auto path = emit_plot_script(aggregate, script.empty() ? std::nullopt : std::optional(std::filesystem::path(script)));
  std::cout << "wrote " << path.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual policy optimization for adversarial linear CMDPs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int parallel = 0;
  auto* run = app.add_subcommand("run", "Run a multi-seed experiment");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--parallel", parallel, "Seeds to run concurrently");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and print the effective parameters");
  validate->add_option("config", validate_path, "Experiment config (JSON)")->required();

  std::string aggregate_path;
  std::string script_path;
  auto* plot = app.add_subcommand("plot", "Write a plotting script for an aggregate CSV");
  plot->add_option("aggregate", aggregate_path, "aggregate.csv from a run")->required();
  plot->add_option("--script", script_path, "Script path (default: next to the CSV)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, parallel);
    if (*validate) return cmd_validate(validate_path);
    if (*plot) return cmd_plot(aggregate_path, script_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InfeasibleInstance& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
