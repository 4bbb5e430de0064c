#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mdfn/network.hpp"

namespace mdfn {

/// How cell-to-cell flows are allocated once a supply constraint binds.
enum class AllocationRule { FreeFlowOnly, Fifo, NonFifo };

std::string_view to_string(AllocationRule rule);
/// Accepts "free", "freeflow", "fifo", "nonfifo" (case-insensitive).
AllocationRule parse_rule(std::string_view name);

/// Raised when a rule or linearization is evaluated outside its domain
/// (free-flow formulas outside the free-flow region).
class RuleDomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Entries in (-tol, 0) are treated as round-off and clamped.
inline constexpr double kClampTolerance = 1e-12;
/// Margin used by "strictly inside" tests.
inline constexpr double kStrictSlack = 1e-10;

/// Cell-to-cell flows f_ij^(k) and cell outflows z_i^(k).
struct FlowField {
  std::vector<Eigen::MatrixXd> flows;  // one cells x cells matrix per commodity
  Eigen::MatrixXd outflows;            // cells x commodities

  /// Total inflow into cell j summed over commodities and origins.
  double total_inflow(Index j) const;
};

/// Clamps round-off negativity; throws std::domain_error for entries below
/// -kClampTolerance.
StateArray project_state(const StateArray& x);

/// Per-(cell, commodity) demand d_i^(k)(x_i^(k)).
Eigen::MatrixXd demands(const Mtn& mtn, const StateArray& x);

/// sum_k sum_i R_ij^(k) d_i^(k)(x_i^(k)).
double aggregate_demand_into(const Mtn& mtn, const StateArray& x, Index j);
/// Aggregate demand into every cell (zero on on-ramps).
Eigen::VectorXd aggregate_demand_into(const Mtn& mtn, const StateArray& x);

/// s_j(sum_k x_j^(k)) - aggregate_demand_into(j) for non-onramp j,
/// +infinity on on-ramps.
Eigen::VectorXd free_flow_slacks(const Mtn& mtn, const StateArray& x);
/// min over free_flow_slacks.
double min_free_flow_slack(const Mtn& mtn, const StateArray& x);
bool is_free_flow(const Mtn& mtn, const StateArray& x);

FlowField flows_free(const Mtn& mtn, const StateArray& x, bool require_free_flow = true);
FlowField flows_fifo(const Mtn& mtn, const StateArray& x);
FlowField flows_nonfifo(const Mtn& mtn, const StateArray& x);
FlowField flows(const Mtn& mtn, const StateArray& x, AllocationRule rule);

/// Mass-conservation right-hand side lambda + sum_j f_ji - z_i.
Eigen::MatrixXd rhs(const Mtn& mtn, const StateArray& x, const InflowArray& lambda,
                    AllocationRule rule);

}  // namespace mdfn
