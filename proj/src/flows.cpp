#include "mdfn/flows.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>

namespace mdfn {

std::string_view to_string(AllocationRule rule) {
  switch (rule) {
    case AllocationRule::FreeFlowOnly:
      return "free";
    case AllocationRule::Fifo:
      return "fifo";
    case AllocationRule::NonFifo:
      return "nonfifo";
  }
  return "?";
}

AllocationRule parse_rule(std::string_view name) {
  std::string lower;
  for (char c : name)
    if (c != '-' && c != '_') lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "free" || lower == "freeflow" || lower == "freeflowonly") return AllocationRule::FreeFlowOnly;
  if (lower == "fifo") return AllocationRule::Fifo;
  if (lower == "nonfifo") return AllocationRule::NonFifo;
  throw std::invalid_argument("unknown allocation rule '" + std::string(name) + "'");
}

double FlowField::total_inflow(Index j) const {
  double total = 0.0;
  for (const auto& f : flows) total += f.col(j).sum();
  return total;
}

StateArray project_state(const StateArray& x) {
  const double lowest = x.size() ? x.minCoeff() : 0.0;
  if (lowest < -kClampTolerance) {
    std::ostringstream msg;
    msg << "state has negative entry " << lowest << " (outside the nonnegative orthant)";
    throw std::domain_error(msg.str());
  }
  return x.cwiseMax(0.0);
}

Eigen::MatrixXd demands(const Mtn& mtn, const StateArray& x) {
  Eigen::MatrixXd d(mtn.num_cells(), mtn.num_commodities());
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    for (Index i = 0; i < mtn.num_cells(); ++i) d(i, k) = mtn.demand(i, k)(x(i, k));
  return d;
}

namespace {

Eigen::VectorXd aggregate_from_demands(const Mtn& mtn, const Eigen::MatrixXd& d) {
  Eigen::VectorXd agg = Eigen::VectorXd::Zero(mtn.num_cells());
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    agg.noalias() += mtn.routing(k).transpose() * d.col(k);
  return agg;
}

Eigen::VectorXd supplies_at(const Mtn& mtn, const StateArray& x) {
  Eigen::VectorXd s = Eigen::VectorXd::Constant(mtn.num_cells(), std::numeric_limits<double>::infinity());
  const Eigen::VectorXd aggregate = x.rowwise().sum();
  for (Index i = 0; i < mtn.num_cells(); ++i)
    if (!mtn.topology.is_onramp(i)) s(i) = mtn.supply(i)(aggregate(i));
  return s;
}

// min(1, s/a) with the convention 1 when nothing is sent.
double scaling_factor(double supply, double demand) {
  if (demand <= 0.0) return 1.0;
  return std::min(1.0, supply / demand);
}

FlowField assemble(const Mtn& mtn, const Eigen::MatrixXd& d, const Eigen::VectorXd& origin_scale,
                   const Eigen::VectorXd& dest_scale) {
  const Index n = mtn.num_cells();
  FlowField field;
  field.flows.reserve(static_cast<std::size_t>(mtn.num_commodities()));
  field.outflows.resize(n, mtn.num_commodities());
  for (Index k = 0; k < mtn.num_commodities(); ++k) {
    Eigen::MatrixXd f = (origin_scale.cwiseProduct(d.col(k))).asDiagonal() * mtn.routing(k);
    f = f * dest_scale.asDiagonal();
    for (Index i = 0; i < n; ++i)
      field.outflows(i, k) = mtn.topology.is_offramp(i) ? d(i, k) : f.row(i).sum();
    field.flows.push_back(std::move(f));
  }
  return field;
}

}  // namespace

double aggregate_demand_into(const Mtn& mtn, const StateArray& x, Index j) {
  double total = 0.0;
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    for (Index i = 0; i < mtn.num_cells(); ++i) {
      const double r = mtn.routing(k)(i, j);
      if (r != 0.0) total += r * mtn.demand(i, k)(x(i, k));
    }
  return total;
}

Eigen::VectorXd aggregate_demand_into(const Mtn& mtn, const StateArray& x) {
  return aggregate_from_demands(mtn, demands(mtn, x));
}

Eigen::VectorXd free_flow_slacks(const Mtn& mtn, const StateArray& x) {
  const Eigen::MatrixXd d = demands(mtn, x);
  return supplies_at(mtn, x) - aggregate_from_demands(mtn, d);
}

double min_free_flow_slack(const Mtn& mtn, const StateArray& x) {
  const Eigen::VectorXd slack = free_flow_slacks(mtn, x);
  return slack.size() ? slack.minCoeff() : std::numeric_limits<double>::infinity();
}

bool is_free_flow(const Mtn& mtn, const StateArray& x) { return min_free_flow_slack(mtn, x) > 0.0; }

FlowField flows_free(const Mtn& mtn, const StateArray& x_in, bool require_free_flow) {
  const StateArray x = project_state(x_in);
  if (require_free_flow && !is_free_flow(mtn, x))
    throw RuleDomainError("free-flow allocation evaluated outside the free-flow region");
  const Index n = mtn.num_cells();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  return assemble(mtn, demands(mtn, x), ones, ones);
}

FlowField flows_fifo(const Mtn& mtn, const StateArray& x_in) {
  const StateArray x = project_state(x_in);
  const Index n = mtn.num_cells();
  const Eigen::MatrixXd d = demands(mtn, x);
  const Eigen::VectorXd agg = aggregate_from_demands(mtn, d);
  const Eigen::VectorXd s = supplies_at(mtn, x);

  Eigen::VectorXd per_dest(n);
  for (Index j = 0; j < n; ++j) per_dest(j) = scaling_factor(s(j), agg(j));

  // One factor per origin: the tightest over every downstream cell it routes to.
  Eigen::VectorXd origin(n);
  for (Index i = 0; i < n; ++i) {
    double gamma = 1.0;
    for (Index j = 0; j < n; ++j) {
      bool downstream = false;
      for (Index k = 0; k < mtn.num_commodities() && !downstream; ++k)
        downstream = mtn.routing(k)(i, j) > 0.0;
      if (downstream) gamma = std::min(gamma, per_dest(j));
    }
    origin(i) = gamma;
  }
  return assemble(mtn, d, origin, Eigen::VectorXd::Ones(n));
}

FlowField flows_nonfifo(const Mtn& mtn, const StateArray& x_in) {
  const StateArray x = project_state(x_in);
  const Index n = mtn.num_cells();
  const Eigen::MatrixXd d = demands(mtn, x);
  const Eigen::VectorXd agg = aggregate_from_demands(mtn, d);
  const Eigen::VectorXd s = supplies_at(mtn, x);
  Eigen::VectorXd per_dest(n);
  for (Index j = 0; j < n; ++j) per_dest(j) = scaling_factor(s(j), agg(j));
  return assemble(mtn, d, Eigen::VectorXd::Ones(n), per_dest);
}

FlowField flows(const Mtn& mtn, const StateArray& x, AllocationRule rule) {
  switch (rule) {
    case AllocationRule::FreeFlowOnly:
      return flows_free(mtn, x);
    case AllocationRule::Fifo:
      return flows_fifo(mtn, x);
    case AllocationRule::NonFifo:
      return flows_nonfifo(mtn, x);
  }
  throw std::invalid_argument("unknown allocation rule");
}

Eigen::MatrixXd rhs(const Mtn& mtn, const StateArray& x, const InflowArray& lambda,
                    AllocationRule rule) {
  const FlowField field = flows(mtn, x, rule);
  Eigen::MatrixXd out = lambda - field.outflows;
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    out.col(k) += field.flows[static_cast<std::size_t>(k)].colwise().sum().transpose();
  return out;
}

}  // namespace mdfn
