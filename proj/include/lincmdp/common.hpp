#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lincmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed configuration or parameters that violate a documented invariant.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal-consistency failure detected at run time (a hard assert).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The constraint cannot be met by any policy.
class InfeasibleInstance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent random stream. Streams are derived from one run seed and a role
/// id, so two streams with different roles never share state.
class RngStream {
 public:
  enum class Role : std::uint32_t { Actions = 1, Transitions = 2, Losses = 3, Costs = 4, Test = 99 };

  RngStream(std::uint64_t seed, Role role) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(role)};
    engine_.seed(seq);
  }

  /// Uniform double in [0, 1) with 53 random bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace lincmdp
