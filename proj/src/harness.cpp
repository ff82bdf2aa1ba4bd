#include "lincmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace lincmdp {

namespace {

using json = nlohmann::json;

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("experiment config must be an object");
    ExperimentConfig cfg;
    if (j.contains("environment")) cfg.environment = j["environment"];
    if (!j.contains("K") || !j["K"].is_number_integer()) throw ConfigError("experiment config: missing integer 'K'");
    cfg.K = j["K"].get<int>();
    if (cfg.K < 1) throw ConfigError("experiment config: K must be >= 1");
    if (!j.contains("seeds") || !j["seeds"].is_array() || j["seeds"].empty())
      throw ConfigError("experiment config: 'seeds' must be a non-empty list");
    for (const auto& s : j["seeds"]) {
      if (!s.is_number_unsigned()) throw ConfigError("experiment config: seeds must be non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    cfg.preset = j.value("preset", cfg.preset);
    if (cfg.preset != "paper-fig1" && cfg.preset != "theory")
      throw ConfigError("experiment config: unknown preset '" + cfg.preset + "'");
    cfg.delta = j.value("delta", cfg.delta);
    if (j.contains("overrides")) {
      const json& o = j["overrides"];
      if (!o.is_object()) throw ConfigError("experiment config: 'overrides' must be an object");
      static const char* known[] = {"alpha", "eta", "theta", "beta_b", "beta_w", "mixing_period"};
      for (const auto& [key, value] : o.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
          throw ConfigError("experiment config: unknown override '" + key + "'");
        if (key == "mixing_period" ? !value.is_number_integer() : !value.is_number())
          throw ConfigError("experiment config: override '" + key + "' has the wrong type");
      }
      cfg.overrides.alpha = optional_field<double>(o, "alpha");
      cfg.overrides.eta = optional_field<double>(o, "eta");
      cfg.overrides.theta = optional_field<double>(o, "theta");
      cfg.overrides.beta_b = optional_field<double>(o, "beta_b");
      cfg.overrides.beta_w = optional_field<double>(o, "beta_w");
      cfg.overrides.mixing_period = optional_field<int>(o, "mixing_period");
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir.string());
    cfg.parallel = j.value("parallel", cfg.parallel);
    if (cfg.parallel < 1) throw ConfigError("experiment config: parallel must be >= 1");
    cfg.optimism_check_every = j.value("optimism_check_every", 0);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

ExperimentConfig paper_fig1_experiment() {
  ExperimentConfig cfg;
  cfg.environment = kJobSchedulingPreset;
  cfg.K = 100000;
  for (std::uint64_t s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
  cfg.preset = "paper-fig1";
  return cfg;
}

HyperParams effective_hyperparams(const ExperimentConfig& config, const LinearCmdpSpec& spec) {
  HyperParams hp = config.preset == "theory"
                       ? HyperParams::theory(config.K, spec.horizon(), spec.dim(), spec.num_actions(), config.delta)
                       : HyperParams::paper_fig1(config.K, spec.horizon(), config.delta);
  const auto& o = config.overrides;
  if (o.alpha) hp.alpha = *o.alpha;
  if (o.eta) hp.eta = *o.eta;
  if (o.theta) hp.theta = *o.theta;
  if (o.beta_b) {
    hp.beta_b = *o.beta_b;
    // beta_w follows beta_b unless given explicitly.
    if (!o.beta_w) {
      const double factor = config.preset == "theory" ? 4.0 : 1.0;
      hp.beta_w = std::max(1.0, factor * hp.beta_b * std::log(static_cast<double>(config.K)));
    }
  }
  if (o.beta_w) hp.beta_w = *o.beta_w;
  if (o.mixing_period) hp.mixing_period = *o.mixing_period;
  hp.validate();
  return hp;
}

SeedResult run_seed(const LinearCmdpSpec& spec, const HyperParams& hp, std::uint64_t seed, LearnerOptions options) {
  SeedResult result;
  result.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    Learner learner(spec, hp, seed, options);
    RunMetrics metrics(spec.budget());
    std::vector<const StepParams*> losses;
    losses.reserve(static_cast<size_t>(hp.K));
    const PolicyFn deployed = [&learner](int h, int s, std::span<double> out) {
      const auto pi = learner.policy_at(h, s);
      std::copy(pi.begin(), pi.end(), out.begin());
    };
    const Learner::Observer observe = [&](const Learner&, const EpisodeRecord& rec) {
      metrics.record_episode(spec, deployed, rec);
      losses.push_back(rec.loss_params);
    };
    for (int k = 1; k <= hp.K; ++k) learner.step(observe);
    result.monitors = learner.monitors();
    result.optimum = constrained_optimum(spec, average_params(losses), spec.budget());
    result.summary = metrics.finalize(result.optimum->value);
    result.rows = metrics.rows();
    result.ok = true;
  } catch (const InfeasibleInstance& e) {
    result.exit_code = kExitInfeasible;
    result.error = e.what();
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfig;
    result.error = e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitRuntime;
    result.error = e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

AggregateCurves aggregate_runs(const std::vector<SeedResult>& results, double budget) {
  AggregateCurves agg;
  std::vector<const SeedResult*> done;
  for (const auto& r : results)
    if (r.ok) done.push_back(&r);
  agg.num_seeds = static_cast<int>(done.size());
  if (done.empty()) return agg;
  size_t n_episodes = done.front()->rows.size();
  for (const auto* r : done) n_episodes = std::min(n_episodes, r->rows.size());
  agg.has_regret = std::all_of(done.begin(), done.end(), [](const SeedResult* r) { return r->optimum.has_value(); });

  std::vector<std::vector<double>> regret;
  std::vector<std::vector<double>> violation;
  for (const auto* r : done) {
    RunMetrics m(budget);
    for (const auto& row : r->rows) m.append(row);
    if (agg.has_regret) regret.push_back(m.cumulative_regret(r->optimum->value));
    violation.push_back(m.cumulative_violation());
  }

  const double n = static_cast<double>(done.size());
  auto band = [&](const std::vector<std::vector<double>>& curves, size_t i, std::vector<double>& mean,
                  std::vector<double>& lo, std::vector<double>& hi) {
    double total = 0.0;
    for (const auto& c : curves) total += c[i];
    const double mu = total / n;
    double var = 0.0;
    if (curves.size() > 1) {
      for (const auto& c : curves) var += (c[i] - mu) * (c[i] - mu);
      var /= (n - 1.0);
    }
    const double half = 1.96 * std::sqrt(var) / std::sqrt(n);
    mean.push_back(mu);
    lo.push_back(mu - half);
    hi.push_back(mu + half);
  };
  for (size_t i = 0; i < n_episodes; ++i) {
    if (agg.has_regret) band(regret, i, agg.regret_mean, agg.regret_lo, agg.regret_hi);
    band(violation, i, agg.violation_mean, agg.violation_lo, agg.violation_hi);
    double step = 0.0;
    for (const auto* r : done) step += r->rows[i].v_g_true - budget;
    agg.step_violation_mean.push_back(step / n);
  }
  return agg;
}

void write_aggregate_csv(std::ostream& out, const AggregateCurves& agg) {
  out << kAggregateCsvHeader << '\n';
  for (size_t i = 0; i < agg.violation_mean.size(); ++i) {
    out << (i + 1) << ',' << agg.num_seeds << ',';
    if (agg.has_regret)
      out << format_number(agg.regret_mean[i]) << ',' << format_number(agg.regret_lo[i]) << ','
          << format_number(agg.regret_hi[i]) << ',';
    else
      out << ",,,";
    out << format_number(agg.violation_mean[i]) << ',' << format_number(agg.violation_lo[i]) << ','
        << format_number(agg.violation_hi[i]) << ',' << format_number(agg.step_violation_mean[i]) << '\n';
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, bool write_files) {
  ExperimentResult out;
  const LinearCmdpSpec spec = load_environment(config.environment, config.K);
  out.hyper = effective_hyperparams(config, spec);
  out.budget = spec.budget();
  out.seeds.resize(config.seeds.size());
  LearnerOptions options;
  options.optimism_check_every = config.optimism_check_every;

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < config.seeds.size(); i = next++)
      out.seeds[i] = run_seed(spec, out.hyper, config.seeds[i], options);
  };
  const size_t workers = std::min<size_t>(static_cast<size_t>(config.parallel), config.seeds.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  out.aggregate = aggregate_runs(out.seeds, spec.budget());
  for (const auto& r : out.seeds)
    if (!r.ok) out.exit_code = std::max(out.exit_code, r.exit_code);

  if (write_files) {
    std::filesystem::create_directories(config.output_dir);
    json summary = {{"K", config.K}, {"preset", config.preset}, {"completed_seeds", out.aggregate.num_seeds}};
    json seeds = json::array();
    for (const auto& r : out.seeds) {
      json entry = {{"seed", r.seed}, {"ok", r.ok}};
      if (r.ok) {
        std::ofstream csv(config.output_dir / ("seed_" + std::to_string(r.seed) + ".csv"));
        RunMetrics m(spec.budget());
        for (const auto& row : r.rows) m.append(row);
        m.write_csv(csv, r.optimum ? std::optional<double>(r.optimum->value) : std::nullopt);
        entry["summary"] = r.summary.to_json();
        entry["slater_gamma"] = r.optimum->slater_gamma;
        entry["lambda_star"] = r.optimum->lambda_star;
        entry["monitors"] = {{"dual_bound_violations", r.monitors.dual_bound_violations},
                             {"q_bound_violations", r.monitors.q_bound_violations},
                             {"q_checks", r.monitors.q_checks},
                             {"optimism_checks", r.monitors.optimism_checks},
                             {"optimism_violations", r.monitors.optimism_violations},
                             {"max_dual_step", r.monitors.max_dual_step}};
      } else {
        entry["error"] = r.error;
        entry["exit_code"] = r.exit_code;
      }
      seeds.push_back(entry);
    }
    summary["seeds"] = seeds;
    std::ofstream agg_csv(config.output_dir / "aggregate.csv");
    write_aggregate_csv(agg_csv, out.aggregate);
    if (out.aggregate.has_regret && !out.aggregate.regret_mean.empty()) {
      if (auto slope = second_half_loglog_slope(out.aggregate.regret_mean)) summary["mean_regret_slope"] = *slope;
    }
    std::ofstream(config.output_dir / "summary.json") << summary.dump(2) << '\n';
  }
  return out;
}

std::string plot_script(const std::filesystem::path& aggregate_csv) {
  std::ostringstream py;
  py << R"(#!/usr/bin/env python3
"""Regret and constraint-violation curves with 95% confidence bands."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

AGGREGATE = )" << json(aggregate_csv.string()).dump()
     << R"(
OUTPUT = sys.argv[1] if len(sys.argv) > 1 else AGGREGATE.rsplit(".", 1)[0] + ".png"


def column(rows, name):
    return [float(r[name]) for r in rows if r.get(name, "") != ""]


with open(AGGREGATE, newline="") as f:
    rows = list(csv.DictReader(f))

k = column(rows, "k")
fig, (ax_regret, ax_violation) = plt.subplots(1, 2, figsize=(10, 4))
for ax, prefix, title in ((ax_regret, "cum_regret", "Regret"),
                          (ax_violation, "cum_violation", "Constraint Violation")):
    mean = column(rows, prefix + "_mean")
    lo = column(rows, prefix + "_lo")
    hi = column(rows, prefix + "_hi")
    if mean:
        ax.plot(k[:len(mean)], mean)
        ax.fill_between(k[:len(mean)], lo, hi, alpha=0.3)
    ax.set_title(title)
    ax.set_xlabel("episode k")
fig.tight_layout()
fig.savefig(OUTPUT, dpi=150)
)";
  return py.str();
}

std::filesystem::path emit_plot_script(const std::filesystem::path& aggregate_csv,
                                       std::optional<std::filesystem::path> script_path) {
  if (!std::filesystem::exists(aggregate_csv)) throw ConfigError("aggregate file not found: " + aggregate_csv.string());
  const auto target = script_path.value_or(aggregate_csv.parent_path() / "plot_aggregate.py");
  std::ofstream out(target);
  if (!out) throw ConfigError("cannot write " + target.string());
  out << plot_script(aggregate_csv);
  return target;
}

ValidationReport validate_config(const ExperimentConfig& config) {
  ValidationReport report;
  auto fail = [&](int code, const std::string& msg) {
    report.ok = false;
    report.exit_code = std::max(report.exit_code, code);
    report.errors.push_back(msg);
  };
  std::optional<LinearCmdpSpec> spec;
  try {
    spec.emplace(load_environment(config.environment, config.K));
  } catch (const ConfigError& e) {
    fail(kExitConfig, e.what());
    return report;
  }
  try {
    report.hyper = effective_hyperparams(config, *spec);
  } catch (const ConfigError& e) {
    fail(kExitConfig, e.what());
  }
  const int H = spec->horizon();
  if (static_cast<double>(H) * H > config.K)
    report.warnings.push_back("theory regime H^2 <= K not met (H^2 = " + std::to_string(H * H) +
                              ", K = " + std::to_string(config.K) + ")");

  const double gamma = slater_margin(*spec, spec->budget());
  report.slater_gamma = gamma;
  if (gamma < 0.0) {
    fail(kExitInfeasible, "infeasible: budget " + format_number(spec->budget()) +
                              " is below the minimum achievable cumulative cost " +
                              format_number(spec->budget() - gamma));
  } else if (gamma == 0.0) {
    report.warnings.push_back("Slater condition fails: gamma = 0");
  }

  std::ostringstream t;
  t << "parameter                 value\n";
  auto row = [&](const std::string& name, double v) {
    t << name << std::string(name.size() < 26 ? 26 - name.size() : 1, ' ') << format_number(v) << '\n';
  };
  row("K", config.K);
  row("H", H);
  row("d", spec->dim());
  row("|A|", spec->num_actions());
  row("b (budget)", spec->budget());
  if (report.hyper) {
    const auto& hp = *report.hyper;
    row("delta", hp.delta);
    row("alpha (policy step)", hp.alpha);
    row("eta (dual step)", hp.eta);
    row("theta (mixing weight)", hp.theta);
    row("beta_b (bonus)", hp.beta_b);
    row("beta_w (contraction)", hp.beta_w);
    row("K^B (mixing period)", hp.mixing_period);
    row("delta_max (dual step)", dual_step_bound(hp));
    row("11 eta H^3 K (dual cap)", dual_value_bound(hp));
    row("epoch bound", epoch_count_bound(spec->dim(), H, config.K));
  }
  row("gamma (Slater margin)", gamma);
  report.table = t.str();
  return report;
}

}  // namespace lincmdp
