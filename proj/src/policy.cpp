#include "lincmdp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lincmdp {

EpochPolicy::EpochPolicy(int horizon, int num_states, int num_actions, int dim, double theta)
    : horizon_(horizon), num_states_(num_states), num_actions_(num_actions), dim_(dim), theta_(theta) {
  if (horizon < 1 || num_states < 1 || num_actions < 1 || dim < 1) throw ConfigError("EpochPolicy: empty dimensions");
  if (!(theta > 0.0 && theta <= 1.0)) throw ConfigError("EpochPolicy: theta must lie in (0, 1]");
  steps_.resize(static_cast<size_t>(horizon));
  reset_epoch();
}

void EpochPolicy::invalidate(Step& step) const {
  step.memo.assign(static_cast<size_t>(num_states_ * num_actions_), 0.0);
  step.memo_valid.assign(static_cast<size_t>(num_states_), 0);
}

void EpochPolicy::reset_epoch() {
  for (Step& step : steps_) {
    step.closed.clear();
    step.open = PolicySegment{Vector::Zero(dim_), 0.0, false};
    invalidate(step);
  }
}

void EpochPolicy::append_episode(int h, const Vector& w_f, const Vector& w_g, double dual, double alpha,
                                 double beta_b) {
  Step& step = steps_[static_cast<size_t>(h)];
  step.open.W.noalias() -= alpha * (w_f + dual * w_g);
  step.open.B += alpha * beta_b * (1.0 + dual);
  invalidate(step);
}

void EpochPolicy::mark_mixing(int h) {
  Step& step = steps_[static_cast<size_t>(h)];
  step.closed.push_back(std::move(step.open));
  step.open = PolicySegment{Vector::Zero(dim_), 0.0, true};
  invalidate(step);
}

void EpochPolicy::evaluate_uncached(int h, int s, const EpochFeatureCache& anchor, std::span<double> out) const {
  const Step& step = steps_[static_cast<size_t>(h)];
  const int A = num_actions_;
  const double uniform = 1.0 / A;
  const double floor = theta_ * uniform;
  std::vector<double> logp(static_cast<size_t>(A), std::log(uniform));

  auto apply = [&](const PolicySegment& seg) {
    if (seg.mixed_before) {
      for (int a = 0; a < A; ++a) {
        const double mixed = (1.0 - theta_) * std::exp(logp[static_cast<size_t>(a)]) + floor;
        require(mixed >= floor * (1.0 - 1e-12), "evaluate: mixed probability below theta/|A|");
        logp[static_cast<size_t>(a)] = std::log(mixed);
      }
    }
    double max_log = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a) {
      const ContractedFeature& f = anchor.at(h, s, a);
      const double exponent = f.phi_bar.dot(seg.W) + seg.B * f.nu_bar;
      require(std::isfinite(exponent), "evaluate: non-finite policy exponent at step " + std::to_string(h));
      double& l = logp[static_cast<size_t>(a)];
      l += exponent;
      max_log = std::max(max_log, l);
    }
    double z = 0.0;
    for (double l : logp) z += std::exp(l - max_log);
    const double log_z = max_log + std::log(z);
    for (double& l : logp) l -= log_z;
  };

  for (const PolicySegment& seg : step.closed) apply(seg);
  apply(step.open);

  double total = 0.0;
  for (int a = 0; a < A; ++a) {
    out[static_cast<size_t>(a)] = std::exp(logp[static_cast<size_t>(a)]);
    total += out[static_cast<size_t>(a)];
  }
  for (int a = 0; a < A; ++a) out[static_cast<size_t>(a)] /= total;
}

std::span<const double> EpochPolicy::evaluate(int h, int s, const EpochFeatureCache& anchor) const {
  const Step& step = steps_[static_cast<size_t>(h)];
  const auto offset = static_cast<size_t>(s * num_actions_);
  std::span<double> slot{step.memo.data() + offset, static_cast<size_t>(num_actions_)};
  if (!step.memo_valid[static_cast<size_t>(s)]) {
    evaluate_uncached(h, s, anchor, slot);
    step.memo_valid[static_cast<size_t>(s)] = 1;
  }
  return slot;
}

namespace {

nlohmann::json segment_json(const PolicySegment& seg) {
  return {{"W", std::vector<double>(seg.W.data(), seg.W.data() + seg.W.size())},
          {"B", seg.B},
          {"mixed_before", seg.mixed_before}};
}

PolicySegment segment_from_json(const nlohmann::json& j, int dim) {
  const auto w = j.at("W").get<std::vector<double>>();
  if (static_cast<int>(w.size()) != dim) throw ConfigError("policy snapshot: segment dimension mismatch");
  PolicySegment seg;
  seg.W = Eigen::Map<const Vector>(w.data(), dim);
  seg.B = j.at("B").get<double>();
  seg.mixed_before = j.at("mixed_before").get<bool>();
  return seg;
}

}  // namespace

nlohmann::json EpochPolicy::snapshot(const EpochFeatureCache& anchor, int epoch, int anchor_episode) const {
  nlohmann::json steps = nlohmann::json::array();
  for (const Step& step : steps_) {
    nlohmann::json segs = nlohmann::json::array();
    for (const PolicySegment& seg : step.closed) segs.push_back(segment_json(seg));
    segs.push_back(segment_json(step.open));
    steps.push_back({{"segments", segs}});
  }
  nlohmann::json entries = nlohmann::json::array();
  for (int h = 0; h < horizon_; ++h)
    for (int s = 0; s < num_states_; ++s)
      for (int a = 0; a < num_actions_; ++a) {
        const ContractedFeature& e = anchor.at(h, s, a);
        entries.push_back({{"nu", e.nu},
                           {"sigma", e.sigma},
                           {"phi_bar", std::vector<double>(e.phi_bar.data(), e.phi_bar.data() + e.phi_bar.size())}});
      }
  return {{"epoch", epoch},
          {"anchor_episode", anchor_episode},
          {"theta", theta_},
          {"horizon", horizon_},
          {"num_states", num_states_},
          {"num_actions", num_actions_},
          {"dim", dim_},
          {"steps", steps},
          {"anchor", {{"entries", entries}}}};
}

std::pair<EpochPolicy, EpochFeatureCache> EpochPolicy::from_snapshot(const nlohmann::json& snap) {
  try {
    const int H = snap.at("horizon").get<int>();
    const int S = snap.at("num_states").get<int>();
    const int A = snap.at("num_actions").get<int>();
    const int d = snap.at("dim").get<int>();
    EpochPolicy policy(H, S, A, d, snap.at("theta").get<double>());
    const auto& steps = snap.at("steps");
    if (static_cast<int>(steps.size()) != H) throw ConfigError("policy snapshot: step count mismatch");
    for (int h = 0; h < H; ++h) {
      const auto& segs = steps[static_cast<size_t>(h)].at("segments");
      if (segs.empty()) throw ConfigError("policy snapshot: missing open segment");
      Step& step = policy.steps_[static_cast<size_t>(h)];
      step.closed.clear();
      for (size_t i = 0; i + 1 < segs.size(); ++i) step.closed.push_back(segment_from_json(segs[i], d));
      step.open = segment_from_json(segs.back(), d);
      policy.invalidate(step);
    }
    EpochFeatureCache cache = EpochFeatureCache::blank(H, S, A);
    const auto& entries = snap.at("anchor").at("entries");
    if (static_cast<int>(entries.size()) != H * S * A) throw ConfigError("policy snapshot: anchor size mismatch");
    size_t i = 0;
    for (int h = 0; h < H; ++h)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a, ++i) {
          ContractedFeature& e = cache.mutable_at(h, s, a);
          e.nu = entries[i].at("nu").get<double>();
          e.sigma = entries[i].at("sigma").get<double>();
          e.nu_bar = e.sigma * e.nu;
          const auto pb = entries[i].at("phi_bar").get<std::vector<double>>();
          if (static_cast<int>(pb.size()) != d) throw ConfigError("policy snapshot: feature dimension mismatch");
          e.phi_bar = Eigen::Map<const Vector>(pb.data(), d);
        }
    return {std::move(policy), std::move(cache)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy snapshot: ") + e.what());
  }
}

}  // namespace lincmdp
