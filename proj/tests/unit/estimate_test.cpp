#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lincmdp/estimate.hpp"

using namespace lincmdp;

TEST(Contraction, ReferenceValues) {
  EXPECT_DOUBLE_EQ(contraction_factor(0.0, 10.0, 100), 100.0 / 101.0);
  const int K = 100000;
  const double beta_w = std::pow(K, 0.25) * std::log(K);
  EXPECT_NEAR(contraction_factor(std::log(K) / beta_w, beta_w, K), 0.5, 1e-12);
  EXPECT_NEAR(contraction_factor((std::log(K) + 5.0) / beta_w, beta_w, K), 0.0066928509242848554, 1e-12);
  EXPECT_EQ(contraction_factor(1e6, 1e6, K), 0.0);
}

TEST(Contraction, DecreasingInNormAndScale) {
  double prev = 1.0;
  for (double nu = 0.0; nu <= 2.0; nu += 0.05) {
    const double s = contraction_factor(nu, 20.0, 1000);
    EXPECT_LE(s, prev);
    EXPECT_GE(s, 0.0);
    prev = s;
  }
  EXPECT_LT(contraction_factor(0.5, 40.0, 1000), contraction_factor(0.5, 20.0, 1000));
}

TEST(CostEstimate, FirstSample) {
  DesignMatrix m(2);
  EXPECT_EQ(cost_param_estimate(m, Vector::Zero(2)), Vector::Zero(2));
  RegressionAccumulator acc(1, 2);
  acc.add(0, Vector::Unit(2, 0), 1.0, 0);
  m.rank_one_update(Vector::Unit(2, 0));
  const Vector est = cost_param_estimate(m, acc.cost_rhs(0));
  EXPECT_NEAR(est(0), 0.5, 1e-15);
  EXPECT_NEAR(est(1), 0.0, 1e-15);
}

TEST(CostEstimate, ConsistentUnderRepeatedSampling) {
  const double mean = 0.55;
  std::mt19937_64 gen(1);
  std::bernoulli_distribution coin(mean);
  DesignMatrix m(20);
  RegressionAccumulator acc(1, 20);
  const Vector phi = Vector::Unit(20, 3);
  for (int i = 0; i < 10000; ++i) {
    acc.add(0, phi, coin(gen) ? 1.0 : 0.0, 0);
    m.rank_one_update(phi);
  }
  EXPECT_NEAR(phi.dot(cost_param_estimate(m, acc.cost_rhs(0))), mean, 0.02);
}

TEST(ValueRegression, FirstSampleExample) {
  DesignMatrix m(2);
  RegressionAccumulator acc(1, 2);
  acc.add(0, Vector::Unit(2, 0), 0.0, 1);
  m.rank_one_update(Vector::Unit(2, 0));
  const std::vector<double> values{0.0, 2.0};
  const Vector w = value_regression(m, acc.next_state_features(0), values);
  EXPECT_NEAR(w(0), 1.0, 1e-15);
  EXPECT_NEAR(w(1), 0.0, 1e-15);
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_EQ(value_regression(m, acc.next_state_features(0), zeros), Vector::Zero(2));
}

TEST(ValueRegression, AggregatedEqualsNaiveSum) {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trace = 0; trace < 50; ++trace) {
    const int d = 5, S = 4;
    DesignMatrix m(d);
    RegressionAccumulator acc(1, d);
    std::vector<std::pair<Vector, int>> samples;
    for (int i = 0; i < 40; ++i) {
      Vector phi(d);
      for (int j = 0; j < d; ++j) phi(j) = u(gen);
      phi /= std::max(1.0, phi.norm());
      const int next = static_cast<int>(gen() % S);
      acc.add(0, phi, 0.0, next);
      m.rank_one_update(phi);
      samples.emplace_back(phi, next);
    }
    std::vector<double> values(S);
    for (double& v : values) v = 5.0 * u(gen);
    Vector naive = Vector::Zero(d);
    for (const auto& [phi, next] : samples) naive += phi * values[static_cast<size_t>(next)];
    naive = m.gram().ldlt().solve(naive);
    EXPECT_LE((value_regression(m, acc.next_state_features(0), values) - naive).cwiseAbs().maxCoeff(), 1e-10);

    Vector total = Vector::Zero(d);
    for (const auto& [s, f] : acc.next_state_features(0)) total += f;
    EXPECT_LE((total - acc.feature_sum(0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(acc.num_samples(0), 40);
  }
}

TEST(ValueRegression, MissingValueIsContractViolation) {
  DesignMatrix m(2);
  RegressionAccumulator acc(1, 2);
  acc.add(0, Vector::Unit(2, 1), 0.0, 1);
  const std::vector<double> values{0.0, std::nan("")};
  EXPECT_THROW(value_regression(m, acc.next_state_features(0), values), ContractViolation);
  const std::vector<double> short_values{0.0};
  EXPECT_THROW(value_regression(m, acc.next_state_features(0), short_values), ContractViolation);
}

TEST(Estimates, QAndV) {
  ContractedFeature e;
  e.nu = 1.0;
  e.sigma = 0.25;
  e.nu_bar = 0.25;
  e.phi_bar = 0.25 * Vector::Unit(3, 1);
  EXPECT_DOUBLE_EQ(q_estimate(e, Vector::Zero(3), 2.0), -0.5);
  EXPECT_DOUBLE_EQ(q_estimate(e, Vector::Constant(3, 4.0), 2.0), 1.0 - 0.5);

  const std::vector<double> uniform{0.5, 0.5}, point{1.0, 0.0}, skew{0.25, 0.75};
  EXPECT_DOUBLE_EQ(v_estimate(uniform, std::vector<double>{1.0, 3.0}), 2.0);
  EXPECT_DOUBLE_EQ(v_estimate(point, std::vector<double>{-7.0, 3.0}), -7.0);
  EXPECT_DOUBLE_EQ(v_estimate(skew, std::vector<double>{0.0, 4.0}), 3.0);
}

TEST(Estimates, FeatureCacheEntries) {
  const FeatureMap features = tabular_features(3, 2);
  std::vector<DesignMatrix> anchors(2, DesignMatrix(6));
  anchors[1].rank_one_update(features(2, 1));
  const int K = 1000;
  const double beta_w = std::pow(K, 0.25) * std::log(K);
  const auto cache = EpochFeatureCache::build(features, anchors, beta_w, K);
  EXPECT_NEAR(cache.anchor_logdet(1), std::log(2.0), 1e-15);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) {
        const auto& e = cache.at(h, s, a);
        const double nu = (h == 1 && s == 2 && a == 1) ? std::sqrt(0.5) : 1.0;
        EXPECT_NEAR(e.nu, nu, 1e-15);
        EXPECT_GT(e.sigma, 0.0);
        EXPECT_LT(e.sigma, 1.0);
        EXPECT_NEAR(e.sigma, 1.0 / (1.0 + std::exp(beta_w * nu - std::log(K))), 1e-15);
        EXPECT_NEAR(e.nu_bar, e.sigma * e.nu, 1e-15);
        EXPECT_LE((e.phi_bar - e.sigma * features(s, a)).norm(), 1e-15);
      }
}

TEST(Hyper, MixingPeriod) {
  EXPECT_EQ(default_mixing_period(1), 1);
  EXPECT_EQ(default_mixing_period(16), 8);
  EXPECT_EQ(default_mixing_period(81), 27);
  EXPECT_EQ(default_mixing_period(10000), 1000);
  EXPECT_EQ(default_mixing_period(100000), 5623);
  EXPECT_EQ(default_mixing_period(1000000), 31622);
}

TEST(Hyper, TheoryWiring) {
  const auto hp = HyperParams::theory(10000, 10, 20, 2, 0.1);
  EXPECT_DOUBLE_EQ(hp.alpha, 1.0 / (10.0 * 1000.0));
  EXPECT_NEAR(hp.eta, 1.0 / (100.0 * 1000.0), 1e-18);
  EXPECT_DOUBLE_EQ(hp.theta, 1e-4);
  const double beta_b = 2 * std::sqrt(2 * 20 * std::log(6e5 / 0.1)) +
                        50 * (10 + 1) * 20 * 10 * std::sqrt(std::log(5 * 100 * 1e8 * 2 / 0.1));
  EXPECT_NEAR(hp.beta_b, beta_b, 1e-9 * beta_b);
  EXPECT_NEAR(hp.beta_w, 4 * beta_b * std::log(10000.0), 1e-9 * hp.beta_w);
  EXPECT_EQ(hp.mixing_period, 1000);
  EXPECT_TRUE(hp.theory_regime());
  EXPECT_NO_THROW(hp.validate());
}

TEST(Hyper, ExperimentWiring) {
  const auto hp = HyperParams::paper_fig1(100000, 10, 0.1);
  EXPECT_EQ(hp.alpha, 0.1);
  EXPECT_NEAR(hp.beta_b, std::pow(1e5, 0.25), 1e-12);
  EXPECT_NEAR(hp.beta_w, std::pow(1e5, 0.25) * std::log(1e5), 1e-9);
  EXPECT_NEAR(hp.eta, 1.0 / (100.0 * std::pow(1e5, 0.75)), 1e-18);
  EXPECT_DOUBLE_EQ(hp.theta, 1e-5);
  EXPECT_EQ(hp.mixing_period, 5623);
  EXPECT_NO_THROW(hp.validate());
}

TEST(Hyper, ValidationRejectsBadValues) {
  auto hp = HyperParams::paper_fig1(1000, 10, 0.1);
  auto bad = hp;
  bad.eta = 1.0;  // 4 * 0.1 * 1 * 1000 > 1
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = hp;
  bad.theta = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = hp;
  bad.alpha = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = hp;
  bad.mixing_period = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = hp;
  bad.delta = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_FALSE(HyperParams::paper_fig1(50, 10, 0.1).theory_regime());
}
