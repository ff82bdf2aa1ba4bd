#include "lincmdp/envmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lincmdp {

namespace {

constexpr double kProbTol = 1e-9;
constexpr double kRangeTol = 1e-12;

using json = nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError("environment config: " + msg); }

int require_positive_int(const json& cfg, const char* key) {
  if (!cfg.contains(key) || !cfg[key].is_number_integer()) config_fail(std::string("missing integer field '") + key + "'");
  const int v = cfg[key].get<int>();
  if (v < 1) config_fail(std::string("'") + key + "' must be >= 1");
  return v;
}

// Converts a per-(s, a) table into a parameter vector for one-hot features.
Vector table_to_params(const FeatureMap& features, const std::vector<double>& per_state_action) {
  if (!features.is_one_hot()) config_fail("table-valued parameters require tabular (one-hot) features");
  Vector out = Vector::Zero(features.dim);
  for (int s = 0; s < features.num_states; ++s) {
    for (int a = 0; a < features.num_actions; ++a) {
      const Vector& phi = features(s, a);
      Eigen::Index idx = 0;
      phi.maxCoeff(&idx);
      out[idx] = per_state_action[static_cast<size_t>(s * features.num_actions + a)];
    }
  }
  return out;
}

// Reads [h][a] (state independent) or [h][s][a] tables into per-step
// parameter vectors.
StepParams parse_step_table(const json& table, const FeatureMap& features, int horizon, const char* what) {
  if (!table.is_array() || static_cast<int>(table.size()) != horizon)
    config_fail(std::string(what) + " must list one entry per step");
  const int S = features.num_states;
  const int A = features.num_actions;
  StepParams out;
  out.reserve(static_cast<size_t>(horizon));
  for (const auto& step : table) {
    std::vector<double> values(static_cast<size_t>(S * A));
    if (!step.is_array() || step.empty()) config_fail(std::string(what) + ": malformed step entry");
    if (step[0].is_number()) {
      if (static_cast<int>(step.size()) != A) config_fail(std::string(what) + ": expected one value per action");
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) values[static_cast<size_t>(s * A + a)] = step[static_cast<size_t>(a)].get<double>();
    } else {
      if (static_cast<int>(step.size()) != S) config_fail(std::string(what) + ": expected one row per state");
      for (int s = 0; s < S; ++s) {
        const auto& row = step[static_cast<size_t>(s)];
        if (!row.is_array() || static_cast<int>(row.size()) != A)
          config_fail(std::string(what) + ": expected one value per action");
        for (int a = 0; a < A; ++a) values[static_cast<size_t>(s * A + a)] = row[static_cast<size_t>(a)].get<double>();
      }
    }
    out.push_back(table_to_params(features, values));
  }
  return out;
}

// psi_h(s') for one-hot features is the column P_h(s' | ., .).
std::vector<std::vector<Vector>> psi_from_rows(const FeatureMap& features, int horizon,
                                               const std::vector<std::vector<std::vector<double>>>& rows) {
  const int S = features.num_states;
  const int A = features.num_actions;
  std::vector<std::vector<Vector>> psi(static_cast<size_t>(horizon));
  for (int h = 0; h < horizon; ++h) {
    std::vector<double> column(static_cast<size_t>(S * A));
    for (int sp = 0; sp < S; ++sp) {
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
          column[static_cast<size_t>(s * A + a)] = rows[static_cast<size_t>(h)][static_cast<size_t>(s * A + a)][static_cast<size_t>(sp)];
      psi[static_cast<size_t>(h)].push_back(table_to_params(features, column));
    }
  }
  return psi;
}

std::vector<double> parse_row(const json& row, int S) {
  if (!row.is_array() || static_cast<int>(row.size()) != S) config_fail("transition rows must have one entry per state");
  std::vector<double> out;
  for (const auto& v : row) out.push_back(v.get<double>());
  return out;
}

}  // namespace

bool FeatureMap::is_one_hot() const {
  for (const Vector& v : table) {
    int ones = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] == 1.0) ++ones;
      else if (v[i] != 0.0) return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

FeatureMap tabular_features(int num_states, int num_actions) {
  if (num_states < 1 || num_actions < 1) throw ConfigError("tabular_features: need at least one state and one action");
  FeatureMap map;
  map.num_states = num_states;
  map.num_actions = num_actions;
  map.dim = num_states * num_actions;
  map.table.reserve(static_cast<size_t>(map.dim));
  for (int i = 0; i < map.dim; ++i) map.table.push_back(Vector::Unit(map.dim, i));
  return map;
}

LossSchedule LossSchedule::fixed(StepParams f) {
  LossSchedule out;
  out.variant_ = Variant::Fixed;
  out.f1_ = std::move(f);
  return out;
}

LossSchedule LossSchedule::two_function_drift(StepParams f1, StepParams f2, int num_episodes) {
  if (num_episodes < 1) throw ConfigError("loss schedule: K must be >= 1");
  LossSchedule out;
  out.variant_ = Variant::TwoFunctionDrift;
  out.f1_ = std::move(f1);
  out.f2_ = std::move(f2);
  out.num_episodes_ = num_episodes;
  return out;
}

double LossSchedule::first_probability(int k) const {
  if (variant_ == Variant::Fixed) return 1.0;
  if (num_episodes_ < 2) return 0.9;
  const double frac = static_cast<double>(k - 1) / static_cast<double>(num_episodes_ - 1);
  return std::clamp(0.9 - 0.9 * frac, 0.0, 0.9);
}

LossSchedule::Draw LossSchedule::draw(int k, RngStream& rng) const {
  if (variant_ == Variant::Fixed) return {1, &f1_};
  const double u = rng.uniform();
  if (u < first_probability(k)) return {1, &f1_};
  return {2, &f2_};
}

LinearCmdpSpec::LinearCmdpSpec(Parts parts)
    : horizon_(parts.horizon),
      features_(std::move(parts.features)),
      psi_(std::move(parts.psi)),
      theta_g_(std::move(parts.theta_g)),
      cost_rule_(parts.cost_rule),
      losses_(std::move(parts.losses)),
      budget_(parts.budget),
      initial_state_(parts.initial_state) {
  const int S = features_.num_states;
  const int A = features_.num_actions;
  const int d = features_.dim;
  if (horizon_ < 1) config_fail("horizon must be >= 1");
  if (S < 1 || A < 1 || d < 1) config_fail("empty state or action set");
  if (static_cast<int>(features_.table.size()) != S * A) config_fail("feature table size mismatch");
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  for (const Vector& phi : features_.table) {
    if (phi.size() != d) config_fail("feature dimension mismatch");
    if (phi.norm() > 1.0 + kRangeTol) config_fail("feature norm exceeds 1");
  }
  if (static_cast<int>(psi_.size()) != horizon_ || static_cast<int>(theta_g_.size()) != horizon_)
    config_fail("per-step parameters must cover every step");
  if (initial_state_ < 0 || initial_state_ >= S) config_fail("initial_state out of range");
  if (!(budget_ >= 0.0 && budget_ <= horizon_)) config_fail("budget must lie in [0, H]");

  rows_.assign(static_cast<size_t>(horizon_ * S * A * S), 0.0);
  for (int h = 0; h < horizon_; ++h) {
    const auto& psi_h = psi_[static_cast<size_t>(h)];
    if (static_cast<int>(psi_h.size()) != S) config_fail("psi must have one vector per next state");
    Vector abs_sum = Vector::Zero(d);
    for (const Vector& v : psi_h) {
      if (v.size() != d) config_fail("psi dimension mismatch");
      abs_sum += v.cwiseAbs();
    }
    if (abs_sum.norm() > sqrt_d * (1.0 + 1e-12)) config_fail("transition measure norm exceeds sqrt(d)");
    if (theta_g_[static_cast<size_t>(h)].size() != d) config_fail("cost parameter dimension mismatch");
    if (theta_g_[static_cast<size_t>(h)].norm() > sqrt_d * (1.0 + 1e-12)) config_fail("cost parameter norm exceeds sqrt(d)");
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double total = 0.0;
        for (int sp = 0; sp < S; ++sp) {
          const double p = features_(s, a).dot(psi_h[static_cast<size_t>(sp)]);
          if (p < -kRangeTol || p > 1.0 + kRangeTol) config_fail("transition probability outside [0, 1]");
          rows_[static_cast<size_t>(((h * S + s) * A + a) * S + sp)] = std::clamp(p, 0.0, 1.0);
          total += p;
        }
        if (std::abs(total - 1.0) > kProbTol) config_fail("transition row does not sum to 1");
        const double g = mean_cost(h, s, a);
        if (g < -kRangeTol || g > 1.0 + kRangeTol) config_fail("mean cost outside [0, 1]");
      }
    }
  }

  auto check_losses = [&](const StepParams& f) {
    if (static_cast<int>(f.size()) != horizon_) config_fail("loss parameters must cover every step");
    for (int h = 0; h < horizon_; ++h) {
      if (f[static_cast<size_t>(h)].size() != d) config_fail("loss parameter dimension mismatch");
      if (f[static_cast<size_t>(h)].norm() > sqrt_d * (1.0 + 1e-12)) config_fail("loss parameter norm exceeds sqrt(d)");
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          const double l = loss(f, h, s, a);
          if (l < -kRangeTol || l > 1.0 + kRangeTol) config_fail("loss value outside [0, 1]");
        }
    }
  };
  check_losses(losses_.first());
  if (losses_.variant() == LossSchedule::Variant::TwoFunctionDrift) check_losses(losses_.second());

  if (cost_rule_ == CostRule::JobProgress) {
    for (int h = 0; h < horizon_; ++h)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
          const auto row = transition_row(h, s, a);
          for (int sp = 0; sp < S; ++sp) {
            if (row[static_cast<size_t>(sp)] <= 0.0) continue;
            const double g = 1.0 - (s - sp) / 2.0;
            if (g < 0.0 || g > 1.0) config_fail("job-progress cost outside [0, 1] on a reachable transition");
          }
        }
  }
}

std::span<const double> LinearCmdpSpec::transition_row(int h, int s, int a) const {
  const int S = num_states();
  const size_t offset = static_cast<size_t>(((h * S + s) * num_actions() + a) * S);
  return {rows_.data() + offset, static_cast<size_t>(S)};
}

int sample_categorical(std::span<const double> probs, RngStream& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = -1;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i);
  }
  require(last_positive >= 0, "sample_categorical: distribution has no mass");
  return last_positive;
}

int LinearCmdpSpec::sample_transition(int h, int s, int a, RngStream& rng) const {
  const auto row = transition_row(h, s, a);
  double total = 0.0;
  for (double p : row) total += p;
  require(std::abs(total - 1.0) <= kProbTol, "sample_transition: row does not sum to 1");
  return sample_categorical(row, rng);
}

double LinearCmdpSpec::sample_cost(int h, int s, int a, int next_state, RngStream& rng) const {
  switch (cost_rule_) {
    case CostRule::JobProgress:
      return 1.0 - (s - next_state) / 2.0;
    case CostRule::Bernoulli:
      return rng.uniform() < mean_cost(h, s, a) ? 1.0 : 0.0;
    case CostRule::Deterministic:
      break;
  }
  return mean_cost(h, s, a);
}

double LinearCmdpSpec::mean_cost(int h, int s, int a) const { return phi(s, a).dot(theta_g_[static_cast<size_t>(h)]); }

LinearCmdpSpec LinearCmdpSpec::with_budget(double budget) const {
  Parts parts{horizon_, features_, psi_, theta_g_, cost_rule_, losses_, budget, initial_state_};
  return LinearCmdpSpec(std::move(parts));
}

std::vector<double> job_transition_row(int num_states, int s, int a, double p_two, double p_one) {
  std::vector<double> row(static_cast<size_t>(num_states), 0.0);
  if (a == 0) {
    row[static_cast<size_t>(s)] = 1.0;
    return row;
  }
  row[static_cast<size_t>(std::max(s - 2, 0))] += p_two;
  row[static_cast<size_t>(std::max(s - 1, 0))] += p_one;
  row[static_cast<size_t>(s)] += 1.0 - p_two - p_one;
  return row;
}

nlohmann::json job_scheduling_config() {
  constexpr int kHorizon = 10;
  json f1 = json::array();
  json f2 = json::array();
  for (int step = 1; step <= kHorizon; ++step) {
    const bool busy1 = step >= 3 && step <= 6;
    const bool busy2 = step >= 4 && step <= 6;
    f1.push_back({1.0, busy1 ? 0.55 : 0.2});
    f2.push_back({1.0, busy2 ? 0.6 : 0.2});
  }
  return {
      {"horizon", kHorizon},
      {"states", 10},
      {"actions", 2},
      {"transition", {{"rule", "job-scheduling"}, {"p_two", 0.8}, {"p_one", 0.1}}},
      {"cost", {{"rule", "job-progress"}}},
      {"loss_schedule", {{"rule", "two-function-drift"}, {"f1", f1}, {"f2", f2}}},
      {"budget", 5.6},
      {"initial_state", 9},
  };
}

LinearCmdpSpec load_environment(const nlohmann::json& config, int num_episodes) {
  if (config.is_string()) {
    if (config.get<std::string>() == kJobSchedulingPreset) return load_environment(job_scheduling_config(), num_episodes);
    config_fail("unknown preset '" + config.get<std::string>() + "'");
  }
  if (!config.is_object()) config_fail("expected an object or a preset id");
  try {
    const int H = require_positive_int(config, "horizon");
    const int S = require_positive_int(config, "states");
    const int A = require_positive_int(config, "actions");
    LinearCmdpSpec::Parts parts;
    parts.horizon = H;
    parts.features = tabular_features(S, A);

    const json& transition = config.at("transition");
    const std::string trule = transition.at("rule").get<std::string>();
    std::vector<std::vector<std::vector<double>>> rows(static_cast<size_t>(H));
    if (trule == "job-scheduling") {
      const double p_two = transition.value("p_two", 0.8);
      const double p_one = transition.value("p_one", 0.1);
      if (p_two < 0 || p_one < 0 || p_two + p_one > 1.0) config_fail("job-scheduling probabilities invalid");
      for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) rows[static_cast<size_t>(h)].push_back(job_transition_row(S, s, a, p_two, p_one));
    } else if (trule == "table") {
      const json& P = transition.at("P");
      const bool stationary = transition.value("stationary", false);
      for (int h = 0; h < H; ++h) {
        const json& Ph = stationary ? P : P.at(static_cast<size_t>(h));
        if (!Ph.is_array() || static_cast<int>(Ph.size()) != S) config_fail("transition table must have one block per state");
        for (int s = 0; s < S; ++s) {
          const json& Ps = Ph.at(static_cast<size_t>(s));
          if (!Ps.is_array() || static_cast<int>(Ps.size()) != A) config_fail("transition table must have one row per action");
          for (int a = 0; a < A; ++a) rows[static_cast<size_t>(h)].push_back(parse_row(Ps.at(static_cast<size_t>(a)), S));
        }
      }
    } else {
      config_fail("unknown transition rule '" + trule + "'");
    }
    parts.psi = psi_from_rows(parts.features, H, rows);

    const json& cost = config.at("cost");
    const std::string crule = cost.at("rule").get<std::string>();
    if (crule == "job-progress") {
      parts.cost_rule = CostRule::JobProgress;
      for (int h = 0; h < H; ++h) {
        std::vector<double> means(static_cast<size_t>(S * A), 0.0);
        for (int s = 0; s < S; ++s)
          for (int a = 0; a < A; ++a) {
            const auto& row = rows[static_cast<size_t>(h)][static_cast<size_t>(s * A + a)];
            double m = 0.0;
            for (int sp = 0; sp < S; ++sp) m += row[static_cast<size_t>(sp)] * (1.0 - (s - sp) / 2.0);
            means[static_cast<size_t>(s * A + a)] = m;
          }
        parts.theta_g.push_back(table_to_params(parts.features, means));
      }
    } else if (crule == "bernoulli" || crule == "deterministic") {
      parts.cost_rule = crule == "bernoulli" ? CostRule::Bernoulli : CostRule::Deterministic;
      parts.theta_g = parse_step_table(cost.at("mean"), parts.features, H, "cost mean");
    } else {
      config_fail("unknown cost rule '" + crule + "'");
    }

    const json& schedule = config.at("loss_schedule");
    const std::string lrule = schedule.at("rule").get<std::string>();
    if (lrule == "fixed") {
      parts.losses = LossSchedule::fixed(parse_step_table(schedule.at("f"), parts.features, H, "loss f"));
    } else if (lrule == "two-function-drift") {
      parts.losses = LossSchedule::two_function_drift(parse_step_table(schedule.at("f1"), parts.features, H, "loss f1"),
                                                      parse_step_table(schedule.at("f2"), parts.features, H, "loss f2"),
                                                      num_episodes);
    } else {
      config_fail("unknown loss schedule '" + lrule + "'");
    }

    if (!config.contains("budget") || !config["budget"].is_number()) config_fail("missing numeric 'budget'");
    parts.budget = config["budget"].get<double>();
    parts.initial_state = config.value("initial_state", 0);
    return LinearCmdpSpec(std::move(parts));
  } catch (const json::exception& e) {
    config_fail(e.what());
  }
}

}  // namespace lincmdp
