#include "lincmdp/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lincmdp {

double dual_update(double dual, double v_g_hat, double budget, const HyperParams& hp) {
  const double H = hp.H;
  const double shrink = 1.0 - 4.0 * hp.alpha * hp.eta * H * H * H;
  const double drift = v_g_hat - budget - 4.0 * hp.alpha * H * H * H - 4.0 * hp.theta * H * H;
  return std::max(0.0, shrink * dual + hp.eta * drift);
}

double dual_step_bound(const HyperParams& hp) {
  const double H = hp.H;
  const double H3 = H * H * H;
  return 44.0 * hp.eta * hp.eta * hp.alpha * H3 * H3 * hp.K + 3.0 * hp.eta * H + 4.0 * hp.eta * hp.alpha * H3 +
         4.0 * hp.eta * hp.theta * H * H;
}

double dual_value_bound(const HyperParams& hp) {
  const double H = hp.H;
  return 11.0 * hp.eta * H * H * H * hp.K;
}

double epoch_count_bound(int dim, int horizon, int num_episodes) {
  return 1.5 * dim * horizon * std::log(2.0 * num_episodes);
}

Learner::Learner(const LinearCmdpSpec& spec, HyperParams hp, std::uint64_t seed, LearnerOptions options)
    : spec_(spec),
      hp_(hp),
      options_(options),
      accumulator_(spec.horizon(), spec.dim()),
      policy_(spec.horizon(), spec.num_states(), spec.num_actions(), spec.dim(), hp.theta),
      action_rng_(seed, RngStream::Role::Actions),
      transition_rng_(seed, RngStream::Role::Transitions),
      loss_rng_(seed, RngStream::Role::Losses),
      cost_rng_(seed, RngStream::Role::Costs) {
  hp_.validate();
  if (hp_.H != spec.horizon()) throw ConfigError("learner: hyperparameter H does not match the environment horizon");
  designs_.assign(static_cast<size_t>(spec.horizon()), DesignMatrix(spec.dim()));
  cache_ = EpochFeatureCache::build(spec.features(), designs_, hp_.beta_w, hp_.K);
  epoch_bound_ = epoch_count_bound(spec.dim(), spec.horizon(), hp_.K);
  dual_step_bound_ = dual_step_bound(hp_);
  dual_value_bound_ = dual_value_bound(hp_);
}

bool Learner::maybe_start_epoch(int k) {
  bool trigger = k == 1 || epoch_ == 0;
  for (int h = 0; h < spec_.horizon() && !trigger; ++h)
    trigger = epoch_trigger(designs_[static_cast<size_t>(h)], cache_.anchor_logdet(h));
  if (!trigger) return false;
  ++epoch_;
  require(epoch_ <= epoch_bound_, "epoch count " + std::to_string(epoch_) + " exceeds (3/2) d H ln(2K) = " +
                                      std::to_string(epoch_bound_));
  anchor_episode_ = k;
  policy_.reset_epoch();
  dual_ = 0.0;
  cache_ = EpochFeatureCache::build(spec_.features(), designs_, hp_.beta_w, hp_.K);
  return true;
}

EpisodeRecord Learner::rollout(int k) {
  EpisodeRecord rec;
  rec.k = k;
  rec.epoch = epoch_;
  rec.dual = dual_;
  rec.mixed = (k - anchor_episode_) % hp_.mixing_period == 0;
  const auto draw = spec_.losses().draw(k, loss_rng_);
  rec.loss_variant = draw.which;
  rec.loss_params = draw.params;
  rec.trajectory.reserve(static_cast<size_t>(spec_.horizon()));
  int s = spec_.initial_state();
  for (int h = 0; h < spec_.horizon(); ++h) {
    const int a = sample_categorical(policy_at(h, s), action_rng_);
    const int next = spec_.sample_transition(h, s, a, transition_rng_);
    const double cost = spec_.sample_cost(h, s, a, next, cost_rng_);
    rec.trajectory.push_back({s, a, cost, next});
    s = next;
  }
  return rec;
}

BackwardResult Learner::backward_pass(int k, const EpisodeRecord& record) {
  const int H = spec_.horizon();
  const int S = spec_.num_states();
  const int A = spec_.num_actions();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool check_optimism = options_.optimism_check_every > 0 && k % options_.optimism_check_every == 0;
  require(record.loss_params != nullptr, "backward_pass: episode has no loss observation");

  BackwardResult out;
  out.w_f.resize(static_cast<size_t>(H));
  out.w_g.resize(static_cast<size_t>(H));
  std::vector<double> next_f(static_cast<size_t>(S), 0.0);
  std::vector<double> next_g(static_cast<size_t>(S), 0.0);
  std::vector<double> cur_f(static_cast<size_t>(S));
  std::vector<double> cur_g(static_cast<size_t>(S));
  std::vector<int> states;
  std::vector<double> q_f(static_cast<size_t>(A));
  std::vector<double> q_g(static_cast<size_t>(A));

  for (int h = H - 1; h >= 0; --h) {
    const DesignMatrix& design = designs_[static_cast<size_t>(h)];
    const auto& aggregated = accumulator_.next_state_features(h);
    Vector w_f = loss_param_passthrough((*record.loss_params)[static_cast<size_t>(h)]) +
                 value_regression(design, aggregated, next_f);
    Vector w_g = cost_param_estimate(design, accumulator_.cost_rhs(h)) + value_regression(design, aggregated, next_g);

    // Value estimates are needed only where the regression one level up looks.
    states.clear();
    if (check_optimism) {
      for (int s = 0; s < S; ++s) states.push_back(s);
    } else if (h == 0) {
      states.push_back(spec_.initial_state());
    } else {
      for (const auto& [s, unused] : accumulator_.next_state_features(h - 1)) states.push_back(s);
    }

    std::fill(cur_f.begin(), cur_f.end(), nan);
    std::fill(cur_g.begin(), cur_g.end(), nan);
    const double q_limit = 2.0 * (H - h);
    for (int s : states) {
      const auto pi = policy_at(h, s);
      for (int a = 0; a < A; ++a) {
        const ContractedFeature& f = cache_.at(h, s, a);
        q_f[static_cast<size_t>(a)] = q_estimate(f, w_f, hp_.beta_b);
        q_g[static_cast<size_t>(a)] = q_estimate(f, w_g, hp_.beta_b);
        monitors_.q_checks += 2;
        if (std::abs(q_f[static_cast<size_t>(a)]) > q_limit) ++monitors_.q_bound_violations;
        if (std::abs(q_g[static_cast<size_t>(a)]) > q_limit) ++monitors_.q_bound_violations;
        if (check_optimism) {
          const auto row = spec_.transition_row(h, s, a);
          double expected_next = 0.0;
          for (int sp = 0; sp < S; ++sp) expected_next += row[static_cast<size_t>(sp)] * next_g[static_cast<size_t>(sp)];
          const double truth = f.sigma * (spec_.mean_cost(h, s, a) + expected_next);
          ++monitors_.optimism_checks;
          if (q_g[static_cast<size_t>(a)] > truth + 1e-9) ++monitors_.optimism_violations;
        }
      }
      cur_f[static_cast<size_t>(s)] = v_estimate(pi, q_f);
      cur_g[static_cast<size_t>(s)] = v_estimate(pi, q_g);
      require(std::isfinite(cur_f[static_cast<size_t>(s)]) && std::isfinite(cur_g[static_cast<size_t>(s)]),
              "backward_pass: non-finite value estimate at step " + std::to_string(h));
    }
    out.w_f[static_cast<size_t>(h)] = std::move(w_f);
    out.w_g[static_cast<size_t>(h)] = std::move(w_g);
    std::swap(next_f, cur_f);
    std::swap(next_g, cur_g);
  }
  out.v_f_hat = next_f[static_cast<size_t>(spec_.initial_state())];
  out.v_g_hat = next_g[static_cast<size_t>(spec_.initial_state())];
  return out;
}

void Learner::finish_episode(const EpisodeRecord& record, const BackwardResult& estimates) {
  const int H = spec_.horizon();
  for (int h = 0; h < H; ++h) {
    if (record.mixed) policy_.mark_mixing(h);
    policy_.append_episode(h, estimates.w_f[static_cast<size_t>(h)], estimates.w_g[static_cast<size_t>(h)], dual_,
                           hp_.alpha, hp_.beta_b);
  }

  const double next_dual = dual_update(dual_, estimates.v_g_hat, spec_.budget(), hp_);
  const double step = std::abs(next_dual - dual_);
  require(next_dual >= 0.0, "dual variable became negative");
  require(step <= dual_step_bound_ * (1.0 + 1e-12),
          "dual step " + std::to_string(step) + " exceeds bound " + std::to_string(dual_step_bound_));
  monitors_.max_dual_step = std::max(monitors_.max_dual_step, step);
  if (next_dual > dual_value_bound_) ++monitors_.dual_bound_violations;
  dual_ = next_dual;
  monitors_.max_dual = std::max(monitors_.max_dual, dual_);

  for (int h = 0; h < H; ++h) {
    const StepRecord& st = record.trajectory[static_cast<size_t>(h)];
    const Vector& phi = spec_.phi(st.state, st.action);
    designs_[static_cast<size_t>(h)].rank_one_update(phi);
    accumulator_.add(h, phi, st.cost, st.next_state);
  }
}

EpisodeRecord Learner::step(const Observer& observer) {
  const int k = ++episode_;
  try {
    const bool reset = maybe_start_epoch(k);
    EpisodeRecord rec = rollout(k);
    rec.reset = reset;
    const BackwardResult estimates = backward_pass(k, rec);
    rec.v_f_hat = estimates.v_f_hat;
    rec.v_g_hat = estimates.v_g_hat;
    if (observer) observer(*this, rec);
    finish_episode(rec, estimates);
    return rec;
  } catch (const ContractViolation& e) {
    throw ContractViolation("episode " + std::to_string(k) + ": " + e.what());
  }
}

std::vector<EpisodeRecord> Learner::run(int num_episodes, const Observer& observer) {
  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<size_t>(std::max(num_episodes, 0)));
  for (int i = 0; i < num_episodes; ++i) records.push_back(step(observer));
  return records;
}

}  // namespace lincmdp
