#include "lincmdp/estimate.hpp"

#include <cmath>
#include <string>

namespace lincmdp {

void HyperParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("hyperparameters: " + msg); };
  if (K < 1) fail("K must be >= 1");
  if (H < 1) fail("H must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  if (!(theta > 0.0 && theta <= 1.0)) fail("theta must lie in (0, 1]");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(eta > 0.0)) fail("eta must be positive");
  if (!(beta_b >= 0.0) || !std::isfinite(beta_b)) fail("beta_b must be finite and non-negative");
  if (!(beta_w >= 1.0) || !std::isfinite(beta_w)) fail("beta_w must be >= 1");
  if (mixing_period < 1) fail("mixing_period must be >= 1");
  const double shrink = 4.0 * alpha * eta * std::pow(static_cast<double>(H), 3);
  if (shrink > 1.0) fail("4 alpha eta H^3 = " + std::to_string(shrink) + " exceeds 1");
}

int default_mixing_period(int K) {
  int p = static_cast<int>(std::floor(std::pow(static_cast<double>(K), 0.75)));
  // Repair floating-point error around exact fourth powers.
  auto fourth_power_fits = [K](long long q) {
    const __int128 q4 = static_cast<__int128>(q) * q * q * q;
    const __int128 k3 = static_cast<__int128>(K) * K * K;
    return q4 <= k3;
  };
  while (p > 1 && !fourth_power_fits(p)) --p;
  while (fourth_power_fits(p + 1)) ++p;
  return std::max(p, 1);
}

HyperParams HyperParams::theory(int K, int H, int dim, int num_actions, double delta) {
  const double k = K;
  const double h = H;
  const double d = dim;
  HyperParams hp;
  hp.K = K;
  hp.H = H;
  hp.delta = delta;
  hp.alpha = 1.0 / (h * std::pow(k, 0.75));
  hp.eta = 1.0 / (h * h * std::pow(k, 0.75));
  hp.theta = 1.0 / k;
  hp.beta_b = 2.0 * std::sqrt(2.0 * d * std::log(6.0 * k * h / delta)) +
              50.0 * (std::pow(k, 0.25) + 1.0) * d * h * std::sqrt(std::log(5.0 * h * h * k * k * num_actions / delta));
  hp.beta_w = std::max(1.0, 4.0 * hp.beta_b * std::log(k));
  hp.mixing_period = default_mixing_period(K);
  return hp;
}

HyperParams HyperParams::paper_fig1(int K, int H, double delta) {
  HyperParams hp = theory(K, H, 1, 1, delta);
  hp.alpha = 0.1;
  hp.beta_b = std::pow(static_cast<double>(K), 0.25);
  hp.beta_w = std::max(1.0, hp.beta_b * std::log(static_cast<double>(K)));
  return hp;
}

double contraction_factor(double nu, double beta_w, int K) {
  const double z = beta_w * nu - std::log(static_cast<double>(K));
  if (z > 700.0) return 0.0;
  return 1.0 / (1.0 + std::exp(z));
}

RegressionAccumulator::RegressionAccumulator(int horizon, int dim)
    : cost_rhs_(static_cast<size_t>(horizon), Vector::Zero(dim)),
      next_features_(static_cast<size_t>(horizon)),
      feature_sum_(static_cast<size_t>(horizon), Vector::Zero(dim)),
      counts_(static_cast<size_t>(horizon), 0) {}

void RegressionAccumulator::add(int h, const Vector& phi, double cost, int next_state) {
  const auto idx = static_cast<size_t>(h);
  cost_rhs_[idx] += cost * phi;
  auto [it, inserted] = next_features_[idx].try_emplace(next_state, Vector::Zero(phi.size()));
  it->second += phi;
  feature_sum_[idx] += phi;
  ++counts_[idx];
}

EpochFeatureCache EpochFeatureCache::blank(int horizon, int num_states, int num_actions) {
  EpochFeatureCache cache;
  cache.horizon_ = horizon;
  cache.num_states_ = num_states;
  cache.num_actions_ = num_actions;
  cache.entries_.resize(static_cast<size_t>(horizon * num_states * num_actions));
  cache.anchor_logdet_.assign(static_cast<size_t>(horizon), 0.0);
  return cache;
}

EpochFeatureCache EpochFeatureCache::build(const FeatureMap& features, const std::vector<DesignMatrix>& anchors,
                                           double beta_w, int K) {
  const int H = static_cast<int>(anchors.size());
  EpochFeatureCache cache = blank(H, features.num_states, features.num_actions);
  for (int h = 0; h < H; ++h) {
    const DesignMatrix& anchor = anchors[static_cast<size_t>(h)];
    cache.anchor_logdet_[static_cast<size_t>(h)] = anchor.logdet();
    for (int s = 0; s < features.num_states; ++s) {
      for (int a = 0; a < features.num_actions; ++a) {
        ContractedFeature& e = cache.mutable_at(h, s, a);
        e.nu = anchor.mahalanobis(features(s, a));
        e.sigma = contraction_factor(e.nu, beta_w, K);
        e.nu_bar = e.sigma * e.nu;
        e.phi_bar = e.sigma * features(s, a);
      }
    }
  }
  return cache;
}

Vector cost_param_estimate(const DesignMatrix& design, const Vector& cost_rhs) { return design.inverse() * cost_rhs; }

Vector value_regression(const DesignMatrix& design, const std::map<int, Vector>& aggregated,
                        std::span<const double> values) {
  Vector rhs = Vector::Zero(design.dim());
  for (const auto& [state, feature_sum] : aggregated) {
    require(state >= 0 && static_cast<size_t>(state) < values.size() && !std::isnan(values[static_cast<size_t>(state)]),
            "value_regression: no value for next state " + std::to_string(state));
    rhs += values[static_cast<size_t>(state)] * feature_sum;
  }
  return design.inverse() * rhs;
}

double q_estimate(const ContractedFeature& entry, const Vector& w, double beta_b) {
  return entry.phi_bar.dot(w) - beta_b * entry.nu_bar;
}

double v_estimate(std::span<const double> policy, std::span<const double> q_row) {
  require(policy.size() == q_row.size(), "v_estimate: size mismatch");
  double v = 0.0;
  for (size_t a = 0; a < policy.size(); ++a) v += policy[a] * q_row[a];
  return v;
}

}  // namespace lincmdp
