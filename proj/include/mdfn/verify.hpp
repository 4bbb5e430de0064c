#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdfn/scenario.hpp"

namespace mdfn {

enum class Suite { Contraction, Jacobian, Regions, All };
Suite parse_suite(std::string_view name);

struct VerifyOptions {
  Suite suite = Suite::All;
  std::uint64_t seed = 0;
  int samples = 100;
  /// Contraction pairs are drawn from the l1 ball of radius factor * delta_bar.
  double radius_factor = 1.0;
  /// Probe integration settings (horizon 50, RK4, dt 0.01).
  IntegratorConfig probe{IntegratorMethod::Rk4, 1e-2, 50.0, 1, kClampTolerance};
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> lines;
  std::optional<std::string> counterexample;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;
  bool passed() const;
  std::string to_string() const;
};

/// Tolerances used by the suites.
inline constexpr double kNonexpansiveSlack = 1e-8;
inline constexpr double kFiniteDifferenceStep = 1e-6;
inline constexpr double kFiniteDifferenceTolerance = 1e-4;
inline constexpr double kMeasureTolerance = 1e-12;
inline constexpr double kRuleAgreementTolerance = 1e-12;
inline constexpr double kEquilibriumResidual = 1e-9;

/// Central finite differences of the full right-hand side with respect to
/// every state entry; rows/cols follow flatten() order.
Eigen::MatrixXd finite_difference_jacobian(const Mtn& mtn, const StateArray& x,
                                           const InflowArray& lambda, AllocationRule rule,
                                           double h = kFiniteDifferenceStep);

/// Runs the selected property suites on a validated scenario. Deterministic
/// for a given seed.
VerifyReport run_verification(const Scenario& scenario, const VerifyOptions& options);

}  // namespace mdfn
