#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mdfn/functions.hpp"
#include "mdfn/linalg.hpp"

namespace mdfn {

using Index = Eigen::Index;

/// Densities x_i^(k); rows are cells, columns commodities, both in
/// declaration order.
using StateArray = Eigen::MatrixXd;
/// Exogenous inflows lambda_i^(k), same layout as StateArray.
using InflowArray = Eigen::MatrixXd;

struct CellSpec {
  std::string id;
  std::string tail;
  std::string head;
};

/// Directed multigraph of cells. On-ramps, off-ramps and the adjacency
/// relation are derived from tail/head and never supplied directly.
class NetworkTopology {
public:
  NetworkTopology() = default;
  NetworkTopology(std::vector<CellSpec> cells, std::string world);

  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  const std::vector<CellSpec>& cells() const { return cells_; }
  const std::string& world() const { return world_; }
  const std::string& cell_id(Index i) const { return cells_[static_cast<std::size_t>(i)].id; }
  std::optional<Index> find_cell(const std::string& id) const;

  bool is_onramp(Index i) const { return onramp_[static_cast<std::size_t>(i)]; }
  bool is_offramp(Index i) const { return offramp_[static_cast<std::size_t>(i)]; }
  /// head(i) == tail(j) != world.
  bool adjacent(Index i, Index j) const;

  std::vector<Index> onramps() const;
  std::vector<Index> offramps() const;
  std::vector<std::pair<Index, Index>> adjacency() const;

private:
  std::vector<CellSpec> cells_;
  std::string world_ = "w";
  std::unordered_map<std::string, Index> index_;
  std::vector<bool> onramp_;
  std::vector<bool> offramp_;
};

struct CommoditySpec {
  std::string id;
  Eigen::MatrixXd routing;              // R^(k), cells x cells
  std::vector<DemandFunction> demands;  // one per cell
};

/// Multi-commodity transportation network. Construction performs no checks;
/// run validate_mtn before analysis.
struct Mtn {
  NetworkTopology topology;
  std::vector<CommoditySpec> commodities;
  std::vector<std::optional<SupplyFunction>> supplies;  // nullopt on on-ramps

  Index num_cells() const { return topology.num_cells(); }
  Index num_commodities() const { return static_cast<Index>(commodities.size()); }
  std::optional<Index> find_commodity(const std::string& id) const;

  const DemandFunction& demand(Index cell, Index commodity) const {
    return commodities[static_cast<std::size_t>(commodity)].demands[static_cast<std::size_t>(cell)];
  }
  const Eigen::MatrixXd& routing(Index commodity) const {
    return commodities[static_cast<std::size_t>(commodity)].routing;
  }
  const SupplyFunction& supply(Index cell) const { return *supplies[static_cast<std::size_t>(cell)]; }

  StateArray zero_state() const { return StateArray::Zero(num_cells(), num_commodities()); }
};

struct Violation {
  std::string tag;  // "structure", "eq. (1)" ... "eq. (5)", "topology"
  std::string cell;
  std::string commodity;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

struct ValidationOptions {
  GridCheck grid{};
  double row_sum_tolerance = 1e-9;
};

/// Checks topology, supply/demand assumptions and routing assumptions.
/// Dimension mismatches are reported, never thrown.
ValidationReport validate_mtn(const Mtn& mtn, const ValidationOptions& options = {});

/// For each cell, whether a path of strictly positive routing entries
/// reaches an off-ramp (length 0 for off-ramps themselves).
std::vector<bool> path_to_sink_exists(const Eigen::MatrixXd& routing,
                                      const NetworkTopology& topology);

/// Density at which the demand delivers `flow`.
inline double demand_inverse(const DemandFunction& d, double flow) { return d.inverse(flow); }

}  // namespace mdfn
