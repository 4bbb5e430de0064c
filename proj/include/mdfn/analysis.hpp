#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdfn/flows.hpp"
#include "mdfn/simulation.hpp"

namespace mdfn {

/// Raised when the transported inflow of some (cell, commodity) is outside
/// the range of its demand function.
class CapacityExceededError : public std::domain_error {
public:
  CapacityExceededError(const std::string& message, std::string cell, std::string commodity)
      : std::domain_error(message), cell_(std::move(cell)), commodity_(std::move(commodity)) {}
  const std::string& cell() const { return cell_; }
  const std::string& commodity() const { return commodity_; }

private:
  std::string cell_;
  std::string commodity_;
};

/// Strict-inequality membership with an explicit boundary band.
enum class Membership { Inside, Boundary, Outside };
std::string_view to_string(Membership m);

struct CapacityCheck {
  Membership status = Membership::Outside;
  /// s_i(sum_k d^{-1}(zeta_k)) - sum_k zeta_k; NaN when out of range.
  double slack = std::numeric_limits<double>::quiet_NaN();
  bool out_of_range = false;
  std::string note;

  bool inside() const { return status == Membership::Inside; }
};

/// Capacity-region test for a non-onramp cell and commodity flow vector zeta.
CapacityCheck capacity_check(const Mtn& mtn, Index cell, const Eigen::VectorXd& zeta);
inline bool capacity_contains(const Mtn& mtn, Index cell, const Eigen::VectorXd& zeta) {
  return capacity_check(mtn, cell, zeta).inside();
}

/// zeta^(k) = (I - R^(k)^T)^{-1} lambda^(k), one column per commodity.
Eigen::MatrixXd transported_inflow(const Mtn& mtn, const InflowArray& lambda);

struct CellRegionReport {
  Index cell = 0;
  CapacityCheck check;
};

struct StabilityRegionReport {
  bool inside = false;
  bool on_boundary = false;  // no failing cell, at least one in the boundary band
  std::vector<CellRegionReport> cells;  // every non-onramp cell
  std::vector<Index> failing_cells;     // Outside or Boundary
};

StabilityRegionReport stability_region_contains(const Mtn& mtn, const InflowArray& lambda);

/// sup over cell states of min(total demand, supply): the largest steady
/// throughput a cell can carry. Closed form for linear demand and affine
/// supply, a 1-D sweep (outer bound, all commodities at the same density)
/// otherwise.
double throughput_capacity(const Mtn& mtn, Index cell);

/// Aggregate mass-balance bound: total exogenous inflow at most the summed
/// throughput capacity of the off-ramps.
Membership bounded_region_membership(const Mtn& mtn, const InflowArray& lambda);

struct EquilibriumResult {
  StateArray x_star;
  Eigen::MatrixXd zeta;
  bool in_free_flow = false;
  /// s_i(sum_k x*_i) - sum_k zeta_i^(k); +infinity on on-ramps.
  Eigen::VectorXd per_cell_slack;
  StabilityRegionReport region;
};

/// Unique free-flow equilibrium candidate x* = d^{-1}((I - R^T)^{-1} lambda).
/// Throws CapacityExceededError when some transported inflow exceeds the
/// demand range.
EquilibriumResult free_flow_equilibrium(const Mtn& mtn, const InflowArray& lambda);

/// Linearization of the free-flow dynamics of commodity k at x:
/// (R^T - I) diag(d'(x)). Throws RuleDomainError outside the free-flow region.
Eigen::MatrixXd jacobian_free_flow(const Mtn& mtn, const StateArray& x, Index commodity);

enum class DeltaBarMethod { AffineClosedForm, SampledLowerBound };
std::string_view to_string(DeltaBarMethod m);

struct DeltaBar {
  double value = 0.0;  // +infinity when the state space is entirely free-flow
  DeltaBarMethod method = DeltaBarMethod::AffineClosedForm;
  /// Smallest l1 distance of a sampled congested state (general case only);
  /// an upper estimate of the true radius. +infinity if none was found.
  double sampled_upper = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_cell;  // radius per cell; +infinity on on-ramps
};

struct DeltaBarOptions {
  int grid_steps = 120;
  int bisection_iterations = 48;
  long samples = 100000;
  std::uint64_t seed = 0;
};

/// l1 distance from a free-flow state to the congested set X \ F.
/// Exact for linear demands with affine supplies, a certified lower bound
/// otherwise. Throws RuleDomainError if x_star is not strictly free-flow.
DeltaBar delta_bar(const Mtn& mtn, const StateArray& x_star, const DeltaBarOptions& options = {});

struct StabilityCertificate {
  std::vector<Eigen::MatrixXd> jacobians;
  Eigen::VectorXd max_real_eigenvalue;
  Eigen::VectorXd l1_measure;
  DeltaBar delta_bar;

  bool hurwitz() const { return (max_real_eigenvalue.array() < -kHurwitzMargin).all(); }
};

StabilityCertificate certify(const Mtn& mtn, const StateArray& x_star,
                             const DeltaBarOptions& options = {});

struct NonexpansivenessReport {
  double initial_distance = 0.0;
  double final_distance = 0.0;
  /// max over the certified window of dist(t) - dist(0).
  double max_growth = 0.0;
  /// max over consecutive steps in the window of dist(t+dt) - dist(t).
  double max_step_increase = 0.0;
  /// End of the window where both trajectories stayed in F.
  double certified_until = 0.0;
  std::optional<double> exit_time;
  bool started_outside = false;
};

/// Integrates from x and y and tracks their l1 distance while both stay in
/// the free-flow region.
NonexpansivenessReport nonexpansiveness_probe(const Mtn& mtn, const InflowArray& lambda,
                                              AllocationRule rule, const StateArray& x,
                                              const StateArray& y, const IntegratorConfig& config);

}  // namespace mdfn
