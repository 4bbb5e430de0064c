#include "mdfn/network.hpp"

#include <cmath>
#include <queue>
#include <sstream>

namespace mdfn {

NetworkTopology::NetworkTopology(std::vector<CellSpec> cells, std::string world)
    : cells_(std::move(cells)), world_(std::move(world)) {
  onramp_.resize(cells_.size());
  offramp_.resize(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    index_.emplace(cells_[i].id, static_cast<Index>(i));
    onramp_[i] = cells_[i].tail == world_;
    offramp_[i] = cells_[i].head == world_;
  }
}

std::optional<Index> NetworkTopology::find_cell(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool NetworkTopology::adjacent(Index i, Index j) const {
  const auto& a = cells_[static_cast<std::size_t>(i)];
  const auto& b = cells_[static_cast<std::size_t>(j)];
  return a.head == b.tail && a.head != world_;
}

std::vector<Index> NetworkTopology::onramps() const {
  std::vector<Index> out;
  for (Index i = 0; i < num_cells(); ++i)
    if (is_onramp(i)) out.push_back(i);
  return out;
}

std::vector<Index> NetworkTopology::offramps() const {
  std::vector<Index> out;
  for (Index i = 0; i < num_cells(); ++i)
    if (is_offramp(i)) out.push_back(i);
  return out;
}

std::vector<std::pair<Index, Index>> NetworkTopology::adjacency() const {
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < num_cells(); ++i)
    for (Index j = 0; j < num_cells(); ++j)
      if (adjacent(i, j)) out.emplace_back(i, j);
  return out;
}

std::optional<Index> Mtn::find_commodity(const std::string& id) const {
  for (std::size_t k = 0; k < commodities.size(); ++k)
    if (commodities[k].id == id) return static_cast<Index>(k);
  return std::nullopt;
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) {
    out << "[" << v.tag << "]";
    if (!v.cell.empty()) out << " cell " << v.cell;
    if (!v.commodity.empty()) out << " commodity " << v.commodity;
    out << ": " << v.message << "\n";
  }
  return out.str();
}

std::vector<bool> path_to_sink_exists(const Eigen::MatrixXd& routing,
                                      const NetworkTopology& topology) {
  const Index n = topology.num_cells();
  std::vector<bool> reaches(static_cast<std::size_t>(n), false);
  // Reverse BFS from the off-ramps along positive entries.
  std::queue<Index> frontier;
  for (Index i = 0; i < n; ++i) {
    if (topology.is_offramp(i)) {
      reaches[static_cast<std::size_t>(i)] = true;
      frontier.push(i);
    }
  }
  while (!frontier.empty()) {
    const Index j = frontier.front();
    frontier.pop();
    for (Index i = 0; i < n; ++i) {
      if (!reaches[static_cast<std::size_t>(i)] && routing(i, j) > 0.0) {
        reaches[static_cast<std::size_t>(i)] = true;
        frontier.push(i);
      }
    }
  }
  return reaches;
}

ValidationReport validate_mtn(const Mtn& mtn, const ValidationOptions& options) {
  ValidationReport report;
  auto add = [&](std::string tag, std::string cell, std::string commodity, std::string message) {
    report.violations.push_back(
        {std::move(tag), std::move(cell), std::move(commodity), std::move(message)});
  };

  const auto& topo = mtn.topology;
  const Index n = topo.num_cells();
  if (n == 0) add("structure", "", "", "network has no cells");
  if (mtn.commodities.empty()) add("structure", "", "", "network has no commodities");

  {
    std::unordered_map<std::string, int> seen;
    for (const auto& c : topo.cells())
      if (++seen[c.id] == 2) add("structure", c.id, "", "duplicate cell identifier");
  }
  for (Index i = 0; i < n; ++i) {
    const auto& c = topo.cells()[static_cast<std::size_t>(i)];
    if (c.tail == c.head) add("topology", c.id, "", "self-loop: tail equals head");
  }

  // Assumption 1(i): supplies on every non-onramp cell.
  if (static_cast<Index>(mtn.supplies.size()) != n) {
    std::ostringstream msg;
    msg << "supply list has " << mtn.supplies.size() << " entries, expected " << n;
    add("structure", "", "", msg.str());
  } else {
    for (Index i = 0; i < n; ++i) {
      const auto& supply = mtn.supplies[static_cast<std::size_t>(i)];
      if (topo.is_onramp(i)) continue;
      if (!supply) {
        add("eq. (1)", topo.cell_id(i), "", "missing supply function on non-onramp cell");
        continue;
      }
      if (auto err = check_supply(*supply, options.grid); !err.empty())
        add("eq. (1)", topo.cell_id(i), "", err);
    }
  }

  {
    std::unordered_map<std::string, int> seen;
    for (const auto& c : mtn.commodities)
      if (++seen[c.id] == 2) add("structure", "", c.id, "duplicate commodity identifier");
  }

  for (const auto& com : mtn.commodities) {
    if (static_cast<Index>(com.demands.size()) != n) {
      std::ostringstream msg;
      msg << "demand list has " << com.demands.size() << " entries, expected " << n;
      add("structure", "", com.id, msg.str());
    } else {
      for (Index i = 0; i < n; ++i)
        if (auto err = check_demand(com.demands[static_cast<std::size_t>(i)], options.grid);
            !err.empty())
          add("eq. (2)", topo.cell_id(i), com.id, err);
    }

    const auto& r = com.routing;
    if (r.rows() != n || r.cols() != n) {
      std::ostringstream msg;
      msg << "routing matrix is " << r.rows() << "x" << r.cols() << ", expected " << n << "x" << n;
      add("structure", "", com.id, msg.str());
      continue;
    }

    bool routing_ok = true;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double v = r(i, j);
        if (!(v >= 0.0) || !std::isfinite(v)) {
          std::ostringstream msg;
          msg << "routing entry to " << topo.cell_id(j) << " is " << v << ", expected >= 0";
          add("eq. (3)", topo.cell_id(i), com.id, msg.str());
          routing_ok = false;
        } else if (v != 0.0 && !topo.adjacent(i, j)) {
          std::ostringstream msg;
          msg << "nonzero routing entry " << v << " to non-adjacent cell " << topo.cell_id(j);
          add("eq. (3)", topo.cell_id(i), com.id, msg.str());
          routing_ok = false;
        }
      }
      const double row_sum = r.row(i).sum();
      const double expected = topo.is_offramp(i) ? 0.0 : 1.0;
      if (std::abs(row_sum - expected) > options.row_sum_tolerance) {
        std::ostringstream msg;
        msg << "routing row sum " << row_sum << ", expected " << expected;
        add("eq. (4)", topo.cell_id(i), com.id, msg.str());
        routing_ok = false;
      }
    }
    if (!routing_ok) continue;

    const auto reaches = path_to_sink_exists(r, topo);
    for (Index i = 0; i < n; ++i)
      if (!reaches[static_cast<std::size_t>(i)])
        add("eq. (5)", topo.cell_id(i), com.id, "no positive routing path to an off-ramp");
  }
  return report;
}

}  // namespace mdfn
