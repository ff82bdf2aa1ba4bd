#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "brute_force.hpp"
#include "lincmdp/oracle.hpp"
#include "monte_carlo.hpp"
#include "random_cmdp.hpp"

using namespace lincmdp;
using namespace lincmdp::test_support;

namespace {

PolicyFn uniform_policy() {
  return [](int, int, std::span<double> out) { std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size())); };
}

PolicyFn random_stochastic_policy(const LinearCmdpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const int A = spec.num_actions();
  auto table = std::make_shared<std::vector<double>>(static_cast<size_t>(spec.horizon() * spec.num_states() * A));
  for (size_t i = 0; i < table->size(); i += static_cast<size_t>(A)) {
    double z = 0;
    for (int a = 0; a < A; ++a) z += ((*table)[i + static_cast<size_t>(a)] = u(gen));
    for (int a = 0; a < A; ++a) (*table)[i + static_cast<size_t>(a)] /= z;
  }
  const int S = spec.num_states();
  return [table, S, A](int h, int s, std::span<double> out) {
    for (int a = 0; a < A; ++a) out[static_cast<size_t>(a)] = (*table)[static_cast<size_t>((h * S + s) * A + a)];
  };
}

StepParams constant_params(const LinearCmdpSpec& spec, double value) {
  return StepParams(static_cast<size_t>(spec.horizon()), Vector::Constant(spec.dim(), value));
}

}  // namespace

TEST(PolicyValue, SingleStepIsExpectedReward) {
  RandomCmdpShape shape{1, 2, 3};
  const auto spec = load_environment(random_cmdp_config(4, shape), 1);
  const auto pi = random_stochastic_policy(spec, 1);
  std::vector<double> p(3);
  pi(0, 0, p);
  double expected = 0;
  for (int a = 0; a < 3; ++a) expected += p[static_cast<size_t>(a)] * spec.loss(spec.losses().first(), 0, 0, a);
  EXPECT_NEAR(dp_policy_value(spec, pi, spec.losses().first()).at(0, 0), expected, 1e-15);
}

TEST(PolicyValue, UnitRewardGivesHorizon) {
  const auto spec = load_environment(kJobSchedulingPreset, 10);
  EXPECT_NEAR(dp_policy_value(spec, uniform_policy(), constant_params(spec, 1.0)).at(0, 9), 10.0, 1e-12);
}

TEST(PolicyValue, MatchesPathEnumeration) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto spec = load_environment(random_cmdp_config(seed, {3, 2, 2}), 1);
    const auto scores = score_all_deterministic(spec, spec.losses().first());
    // Policy index 0 plays action 0 everywhere.
    const PolicyFn zero = [](int, int, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      out[0] = 1.0;
    };
    EXPECT_NEAR(dp_policy_value(spec, zero, spec.losses().first()).at(0, 0), scores.front().loss, 1e-12);
    EXPECT_NEAR(dp_policy_value(spec, zero, spec.theta_g()).at(0, 0), scores.front().cost, 1e-12);
  }
}

TEST(PolicyValue, MatchesMonteCarlo) {
  const auto spec = load_environment(random_cmdp_config(12, {4, 3, 2}, true), 1);
  const auto pi = random_stochastic_policy(spec, 2);
  const double exact_f = dp_policy_value(spec, pi, spec.losses().first()).at(0, 0);
  const double exact_g = dp_policy_value(spec, pi, spec.theta_g()).at(0, 0);
  const auto mc_f = monte_carlo_value(spec, pi, spec.losses().first(), 200000, 1);
  const auto mc_g = monte_carlo_value(spec, pi, spec.theta_g(), 200000, 2, true);
  EXPECT_LE(std::abs(mc_f.mean - exact_f), 3 * mc_f.std_error);
  EXPECT_LE(std::abs(mc_g.mean - exact_g), 3 * mc_g.std_error);
}

TEST(Optimum, SlackBudgetIsUnconstrained) {
  const auto spec = load_environment(random_cmdp_config(3, {3, 2, 2}), 1);
  const auto opt = constrained_optimum(spec, spec.losses().first(), 3.0);
  EXPECT_EQ(opt.lambda_star, 0.0);
  EXPECT_NEAR(opt.value, dp_minimize(spec, spec.losses().first()).values.at(0, 0), 1e-12);
}

TEST(Optimum, MatchesBruteForce) {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 40 && checked < 10; ++seed) {
    const auto spec = load_environment(random_cmdp_config(seed, {2 + static_cast<int>(seed % 2), 2, 2}), 1);
    const double lo = dp_minimize(spec, spec.theta_g()).values.at(0, 0);
    const auto unconstrained = dp_minimize(spec, spec.losses().first());
    const int S = spec.num_states();
    const PolicyFn greedy = [&](int h, int s, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      out[static_cast<size_t>(unconstrained.actions[static_cast<size_t>(h * S + s)])] = 1.0;
    };
    const double hi = dp_policy_value(spec, greedy, spec.theta_g()).at(0, 0);
    if (hi - lo < 0.05) continue;  // constraint would never bind
    const double budget = lo + 0.4 * (hi - lo);
    const auto opt = constrained_optimum(spec, spec.losses().first(), budget);
    const auto brute = brute_force_optimum(spec, spec.losses().first(), budget);
    ASSERT_TRUE(brute.has_value());
    EXPECT_NEAR(opt.value, *brute, 1e-4) << "seed " << seed;
    EXPECT_GT(opt.lambda_star, 0.0);
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(Dual, ConcaveOnRandomInstances) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto spec = load_environment(random_cmdp_config(seed, {3, 3, 2}), 1);
    for (int i = 0; i < 20; ++i) {
      const double a = u(gen), b = u(gen);
      const double da = dual_function(spec, spec.losses().first(), 1.2, a).value;
      const double db = dual_function(spec, spec.losses().first(), 1.2, b).value;
      const double dm = dual_function(spec, spec.losses().first(), 1.2, 0.5 * (a + b)).value;
      EXPECT_GE(dm, 0.5 * (da + db) - 1e-12);
    }
  }
}

TEST(Optimum, WeakDualityBoundsTheOptimum) {
  const auto spec = load_environment(random_cmdp_config(7, {3, 2, 2}), 1);
  const double budget = dp_minimize(spec, spec.theta_g()).values.at(0, 0) + 0.1;
  const auto opt = constrained_optimum(spec, spec.losses().first(), budget);
  for (double lambda : {0.0, 0.5, 1.0, 3.0, 10.0})
    EXPECT_LE(dual_function(spec, spec.losses().first(), budget, lambda).value, opt.value + 1e-12);
}

TEST(Slater, JobSchedulingMargin) {
  const auto spec = load_environment(kJobSchedulingPreset, 10);
  // b - (11/2 + E[s_11] / 2) under always-process, E[s_11] = 0.0004174897.
  EXPECT_NEAR(slater_margin(spec, 5.6), 0.09979125515, 1e-10);
  const auto opt = constrained_optimum(spec, spec.losses().first(), 5.6);
  EXPECT_NEAR(opt.slater_gamma, 0.09979125515, 1e-10);
}

TEST(Slater, DegenerateAndInfeasible) {
  auto cfg = random_cmdp_config(2, {2, 2, 2});
  cfg["cost"]["mean"] = {{{1.0, 1.0}, {1.0, 1.0}}, {{1.0, 1.0}, {1.0, 1.0}}};
  cfg["budget"] = 2.0;
  const auto full = load_environment(cfg, 1);
  EXPECT_NEAR(slater_margin(full, 2.0), 0.0, 1e-15);
  EXPECT_NO_THROW(constrained_optimum(full, full.losses().first(), 2.0));
  EXPECT_THROW(constrained_optimum(full, full.losses().first(), 1.5), InfeasibleInstance);

  cfg["cost"]["mean"] = {{{0.0, 1.0}, {0.0, 1.0}}, {{0.0, 1.0}, {0.0, 1.0}}};
  const auto free_action = load_environment(cfg, 1);
  EXPECT_NEAR(slater_margin(free_action, 2.0), 2.0, 1e-15);
}

TEST(Average, IsArithmeticMean) {
  const auto spec = load_environment(kJobSchedulingPreset, 10);
  const StepParams* seq[] = {&spec.losses().first(), &spec.losses().first(), &spec.losses().second()};
  const auto avg = average_params(seq);
  for (int h = 0; h < 10; ++h)
    EXPECT_LE((avg[static_cast<size_t>(h)] - (2.0 * spec.losses().first()[static_cast<size_t>(h)] +
                                               spec.losses().second()[static_cast<size_t>(h)]) / 3.0)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
}
