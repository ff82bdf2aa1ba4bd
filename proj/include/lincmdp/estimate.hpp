#pragma once

#include <map>
#include <span>
#include <vector>

#include "lincmdp/common.hpp"
#include "lincmdp/envmodel.hpp"
#include "lincmdp/linalg.hpp"

namespace lincmdp {

/// Learner hyperparameters. Symbols: alpha (policy step), eta (dual step),
/// theta (mixing weight), beta_b (bonus), beta_w (contraction), delta.
struct HyperParams {
  int K = 1;
  int H = 1;
  double delta = 0.1;
  double alpha = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double beta_b = 0.0;
  double beta_w = 1.0;
  int mixing_period = 1;

  /// Throws ConfigError when an invariant fails, including 4 alpha eta H^3 > 1.
  void validate() const;

  /// H^2 <= K.
  bool theory_regime() const { return static_cast<double>(H) * H <= static_cast<double>(K); }

  /// Step sizes alpha = H^-1 K^-3/4, eta = H^-2 K^-3/4, theta = 1/K,
  /// beta_w = 4 beta_b ln K, period = floor(K^3/4), and the high-probability
  /// bonus beta_b = 2 sqrt(2 d ln(6KH/delta)) + 50 (K^1/4 + 1) d H sqrt(ln(5 H^2 K^2 |A| / delta)).
  static HyperParams theory(int K, int H, int dim, int num_actions, double delta);

  /// Experiment wiring: alpha = 0.1, beta_b = K^1/4, beta_w = beta_b ln K,
  /// everything else as in theory().
  static HyperParams paper_fig1(int K, int H, double delta);
};

/// floor(K^{3/4}), computed without floating-point undershoot at perfect powers.
int default_mixing_period(int K);

/// sigmoid(-beta_w nu + ln K) = 1 / (1 + exp(beta_w nu - ln K)).
double contraction_factor(double nu, double beta_w, int K);

/// Least-squares right-hand sides for one episode index range, per step:
/// b_g = sum phi g and, for every observed next state s', the aggregated
/// feature sum over samples that landed in s'.
class RegressionAccumulator {
 public:
  RegressionAccumulator(int horizon, int dim);

  void add(int h, const Vector& phi, double cost, int next_state);

  const Vector& cost_rhs(int h) const { return cost_rhs_[static_cast<size_t>(h)]; }
  const std::map<int, Vector>& next_state_features(int h) const { return next_features_[static_cast<size_t>(h)]; }
  const Vector& feature_sum(int h) const { return feature_sum_[static_cast<size_t>(h)]; }
  long num_samples(int h) const { return counts_[static_cast<size_t>(h)]; }

 private:
  std::vector<Vector> cost_rhs_;
  std::vector<std::map<int, Vector>> next_features_;
  std::vector<Vector> feature_sum_;
  std::vector<long> counts_;
};

/// Epoch-anchored quantities for one (h, s, a).
struct ContractedFeature {
  double nu = 0.0;      // ||phi||_{Lambda_{k_e}^{-1}}
  double sigma = 0.0;   // contraction factor
  double nu_bar = 0.0;  // sigma * nu
  Vector phi_bar;       // sigma * phi
};

/// Contracted features for all (h, s, a) under the anchor matrices of the
/// current epoch, plus the anchor log-determinants for the doubling test.
class EpochFeatureCache {
 public:
  EpochFeatureCache() = default;

  static EpochFeatureCache build(const FeatureMap& features, const std::vector<DesignMatrix>& anchors, double beta_w,
                                 int K);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  const ContractedFeature& at(int h, int s, int a) const {
    return entries_[static_cast<size_t>((h * num_states_ + s) * num_actions_ + a)];
  }
  double anchor_logdet(int h) const { return anchor_logdet_[static_cast<size_t>(h)]; }

  /// Replaces one entry; only for tests and snapshot loading.
  ContractedFeature& mutable_at(int h, int s, int a) {
    return entries_[static_cast<size_t>((h * num_states_ + s) * num_actions_ + a)];
  }
  static EpochFeatureCache blank(int horizon, int num_states, int num_actions);

 private:
  int horizon_ = 0;
  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<ContractedFeature> entries_;
  std::vector<double> anchor_logdet_;
};

/// theta_hat_g = Lambda^{-1} b_g.
Vector cost_param_estimate(const DesignMatrix& design, const Vector& cost_rhs);

/// Full-information loss feedback: the estimate is the observation.
inline const Vector& loss_param_passthrough(const Vector& observed) { return observed; }

/// psi_hat V = Lambda^{-1} sum_{s'} aggregated[s'] V(s'). `values` is indexed
/// by state; a NaN entry for an observed next state is a contract violation.
Vector value_regression(const DesignMatrix& design, const std::map<int, Vector>& aggregated,
                        std::span<const double> values);

/// Q_hat = phi_bar^T w - beta_b ||phi_bar||_{Lambda_{k_e}^{-1}}.
double q_estimate(const ContractedFeature& entry, const Vector& w, double beta_b);

/// sum_a pi(a) Q(a).
double v_estimate(std::span<const double> policy, std::span<const double> q_row);

}  // namespace lincmdp
