#include "mdfn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mdfn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Membership classify(double slack) {
  if (slack > kStrictSlack) return Membership::Inside;
  if (slack >= -kStrictSlack) return Membership::Boundary;
  return Membership::Outside;
}

bool all_linear_affine(const Mtn& mtn) {
  for (const auto& com : mtn.commodities)
    for (const auto& d : com.demands)
      if (!d.is_linear()) return false;
  for (Index i = 0; i < mtn.num_cells(); ++i)
    if (!mtn.topology.is_onramp(i) && !mtn.supply(i).is_affine()) return false;
  return true;
}

double linear_slope(const DemandFunction& d) { return std::get<LinearDemand>(d.kind()).slope; }
const AffineSupply& affine_params(const SupplyFunction& s) { return std::get<AffineSupply>(s.kind()); }

// One monotone piece of the free-flow constraint of a cell: the increase of
// (incoming demand - supply) when a coordinate group grows by delta.
struct ConstraintGroup {
  std::function<double(double)> increase;
  double supremum = 0.0;
};

std::vector<ConstraintGroup> constraint_groups(const Mtn& mtn, const StateArray& x, Index cell) {
  std::vector<ConstraintGroup> groups;
  for (Index k = 0; k < mtn.num_commodities(); ++k) {
    const auto& r = mtn.routing(k);
    for (Index j = 0; j < mtn.num_cells(); ++j) {
      const double ratio = r(j, cell);
      if (j == cell || ratio <= 0.0) continue;
      const DemandFunction& d = mtn.demand(j, k);
      const double base = d(x(j, k));
      groups.push_back({[&d, ratio, base, at = x(j, k)](double delta) {
                          return ratio * (d(at + delta) - base);
                        },
                        ratio * (d.supremum() - base)});
    }
  }
  const SupplyFunction& s = mtn.supply(cell);
  const double aggregate = x.row(cell).sum();
  const double base = s(aggregate);
  groups.push_back({[&s, base, aggregate](double delta) { return base - s(aggregate + delta); },
                    base - s.infimum()});
  return groups;
}

// Upper bound on max sum_g h_g(delta_g) subject to sum_g delta_g <= radius.
// Increments are rounded up to a grid of radius/steps, so any feasible
// allocation is dominated by a grid allocation using at most steps + G units.
double worst_case_increase(const std::vector<ConstraintGroup>& groups, double radius, int steps) {
  const double unit = radius / steps;
  const std::size_t budget = static_cast<std::size_t>(steps) + groups.size();
  std::vector<double> best(budget + 1, 0.0);
  std::vector<double> values(budget + 1);
  std::vector<double> next(budget + 1);
  for (const auto& g : groups) {
    for (std::size_t m = 0; m <= budget; ++m) values[m] = g.increase(static_cast<double>(m) * unit);
    for (std::size_t b = 0; b <= budget; ++b) {
      double v = -kInf;
      for (std::size_t m = 0; m <= b; ++m) v = std::max(v, best[b - m] + values[m]);
      next[b] = v;
    }
    best.swap(next);
  }
  return best[budget];
}

double certified_cell_radius(const Mtn& mtn, const StateArray& x, Index cell, double slack,
                             const DeltaBarOptions& options) {
  const auto groups = constraint_groups(mtn, x, cell);
  double total_sup = 0.0;
  for (const auto& g : groups) total_sup += g.supremum;
  if (total_sup < slack) return kInf;

  auto safe = [&](double r) { return worst_case_increase(groups, r, options.grid_steps) < slack; };
  double lo = 0.0;
  double hi = 1.0;
  while (safe(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return kInf;
  }
  for (int it = 0; it < options.bisection_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (safe(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double sampled_congested_distance(const Mtn& mtn, const StateArray& x, double radius,
                                  const DeltaBarOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double best = kInf;
  StateArray y(x.rows(), x.cols());
  for (long s = 0; s < options.samples; ++s) {
    // Uniform direction on the l1 sphere with random signs, random radius.
    double total = 0.0;
    for (Index e = 0; e < y.size(); ++e) {
      y(e) = expo(rng) * (unit(rng) < 0.5 ? -1.0 : 1.0);
      total += std::abs(y(e));
    }
    const double r = radius * unit(rng);
    y = (x + (r / total) * y).cwiseMax(0.0);
    if (!is_free_flow(mtn, y)) best = std::min(best, (y - x).lpNorm<1>());
  }
  return best;
}

}  // namespace

std::string_view to_string(Membership m) {
  switch (m) {
    case Membership::Inside:
      return "inside";
    case Membership::Boundary:
      return "boundary";
    case Membership::Outside:
      return "outside";
  }
  return "?";
}

std::string_view to_string(DeltaBarMethod m) {
  return m == DeltaBarMethod::AffineClosedForm ? "affine-closed-form" : "sampled-lower-bound";
}

CapacityCheck capacity_check(const Mtn& mtn, Index cell, const Eigen::VectorXd& zeta) {
  if (mtn.topology.is_onramp(cell))
    throw std::invalid_argument("capacity region is defined for non-onramp cells only");
  if (zeta.size() != mtn.num_commodities())
    throw std::invalid_argument("capacity query: zeta must have one entry per commodity");
  if ((zeta.array() < 0.0).any()) throw std::invalid_argument("capacity query: zeta must be >= 0");

  CapacityCheck out;
  double density = 0.0;
  for (Index k = 0; k < zeta.size(); ++k) {
    try {
      density += mtn.demand(cell, k).inverse(zeta(k));
    } catch (const DemandRangeError& e) {
      out.status = Membership::Outside;
      out.out_of_range = true;
      out.note = "commodity " + mtn.commodities[static_cast<std::size_t>(k)].id + ": " + e.what();
      return out;
    }
  }
  out.slack = mtn.supply(cell)(density) - zeta.sum();
  out.status = classify(out.slack);
  return out;
}

Eigen::MatrixXd transported_inflow(const Mtn& mtn, const InflowArray& lambda) {
  Eigen::MatrixXd zeta(mtn.num_cells(), mtn.num_commodities());
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    zeta.col(k) = leontief_inverse_apply(mtn.routing(k), lambda.col(k));
  return zeta;
}

StabilityRegionReport stability_region_contains(const Mtn& mtn, const InflowArray& lambda) {
  const Eigen::MatrixXd zeta = transported_inflow(mtn, lambda);
  StabilityRegionReport report;
  bool any_outside = false;
  bool any_boundary = false;
  for (Index i = 0; i < mtn.num_cells(); ++i) {
    if (mtn.topology.is_onramp(i)) continue;
    // Round-off from the solve can leave -1e-17 style entries.
    const Eigen::VectorXd row = zeta.row(i).transpose().cwiseMax(0.0);
    CellRegionReport cell{i, capacity_check(mtn, i, row)};
    if (cell.check.status == Membership::Outside) any_outside = true;
    if (cell.check.status == Membership::Boundary) any_boundary = true;
    if (cell.check.status != Membership::Inside) report.failing_cells.push_back(i);
    report.cells.push_back(std::move(cell));
  }
  report.inside = !any_outside && !any_boundary;
  report.on_boundary = !any_outside && any_boundary;
  return report;
}

double throughput_capacity(const Mtn& mtn, Index cell) {
  if (mtn.topology.is_onramp(cell)) return kInf;
  bool linear = mtn.supply(cell).is_affine();
  for (Index k = 0; k < mtn.num_commodities() && linear; ++k) linear = mtn.demand(cell, k).is_linear();
  if (linear) {
    // All mass on the fastest commodity: beta * a = gamma - alpha * a.
    double beta = 0.0;
    for (Index k = 0; k < mtn.num_commodities(); ++k) beta = std::max(beta, linear_slope(mtn.demand(cell, k)));
    const auto& s = affine_params(mtn.supply(cell));
    return beta * s.intercept / (beta + s.slope);
  }
  double best = 0.0;
  constexpr int kSweep = 4000;
  for (int p = 0; p <= kSweep; ++p) {
    const double a = p == 0 ? 0.0 : 1e-6 * std::pow(kInverseBracket / 1e-6, static_cast<double>(p) / kSweep);
    double total = 0.0;
    for (Index k = 0; k < mtn.num_commodities(); ++k) total += mtn.demand(cell, k)(a);
    best = std::max(best, std::min(total, mtn.supply(cell)(a)));
  }
  return best;
}

Membership bounded_region_membership(const Mtn& mtn, const InflowArray& lambda) {
  double capacity = 0.0;
  for (Index i : mtn.topology.offramps()) capacity += throughput_capacity(mtn, i);
  if (std::isinf(capacity)) return Membership::Inside;
  return classify(capacity - lambda.sum());
}

EquilibriumResult free_flow_equilibrium(const Mtn& mtn, const InflowArray& lambda) {
  EquilibriumResult result;
  result.zeta = transported_inflow(mtn, lambda).cwiseMax(0.0);
  result.x_star.resize(mtn.num_cells(), mtn.num_commodities());
  for (Index i = 0; i < mtn.num_cells(); ++i) {
    for (Index k = 0; k < mtn.num_commodities(); ++k) {
      try {
        result.x_star(i, k) = mtn.demand(i, k).inverse(result.zeta(i, k));
      } catch (const DemandRangeError& e) {
        const auto& cell = mtn.topology.cell_id(i);
        const auto& com = mtn.commodities[static_cast<std::size_t>(k)].id;
        std::ostringstream msg;
        msg << "inflow exceeds network capacity at cell " << cell << ", commodity " << com << ": "
            << e.what();
        throw CapacityExceededError(msg.str(), cell, com);
      }
    }
  }
  result.per_cell_slack = Eigen::VectorXd::Constant(mtn.num_cells(), kInf);
  for (Index i = 0; i < mtn.num_cells(); ++i)
    if (!mtn.topology.is_onramp(i))
      result.per_cell_slack(i) = mtn.supply(i)(result.x_star.row(i).sum()) - result.zeta.row(i).sum();
  result.region = stability_region_contains(mtn, lambda);
  result.in_free_flow = result.region.inside;
  return result;
}

Eigen::MatrixXd jacobian_free_flow(const Mtn& mtn, const StateArray& x, Index commodity) {
  if (!is_free_flow(mtn, x))
    throw RuleDomainError("free-flow Jacobian requested outside the free-flow region");
  const Index n = mtn.num_cells();
  Eigen::VectorXd slopes(n);
  for (Index i = 0; i < n; ++i) slopes(i) = mtn.demand(i, commodity).derivative(x(i, commodity));
  const Eigen::MatrixXd& r = mtn.routing(commodity);
  return (r.transpose() - Eigen::MatrixXd::Identity(n, n)) * slopes.asDiagonal();
}

DeltaBar delta_bar(const Mtn& mtn, const StateArray& x_star, const DeltaBarOptions& options) {
  const Eigen::VectorXd slacks = free_flow_slacks(mtn, x_star);
  if (slacks.size() && slacks.minCoeff() <= kStrictSlack)
    throw RuleDomainError("delta_bar: state is not strictly inside the free-flow region");

  const Index n = mtn.num_cells();
  const Index m = mtn.num_commodities();
  DeltaBar out;
  out.per_cell.assign(static_cast<std::size_t>(n), kInf);

  if (all_linear_affine(mtn)) {
    out.method = DeltaBarMethod::AffineClosedForm;
    for (Index i = 0; i < n; ++i) {
      if (mtn.topology.is_onramp(i)) continue;
      const auto& s = affine_params(mtn.supply(i));
      // Constraint: sum_{j,k} R_ji beta_j x_j + alpha_i sum_k x_i < gamma_i.
      Eigen::MatrixXd coef(n, m);
      for (Index k = 0; k < m; ++k)
        for (Index j = 0; j < n; ++j)
          coef(j, k) = mtn.routing(k)(j, i) * linear_slope(mtn.demand(j, k)) + (j == i ? s.slope : 0.0);
      const double slack = s.intercept - coef.cwiseProduct(x_star).sum();
      const double largest = coef.maxCoeff();
      out.per_cell[static_cast<std::size_t>(i)] = largest > 0.0 ? slack / largest : kInf;
    }
  } else {
    out.method = DeltaBarMethod::SampledLowerBound;
    for (Index i = 0; i < n; ++i) {
      if (mtn.topology.is_onramp(i)) continue;
      out.per_cell[static_cast<std::size_t>(i)] = certified_cell_radius(mtn, x_star, i, slacks(i), options);
    }
  }
  out.value = *std::min_element(out.per_cell.begin(), out.per_cell.end());

  if (out.method == DeltaBarMethod::SampledLowerBound && options.samples > 0) {
    const double radius = std::isinf(out.value) ? 10.0 : 2.0 * std::max(out.value, 1e-3);
    out.sampled_upper = sampled_congested_distance(mtn, x_star, radius, options);
  }
  return out;
}

StabilityCertificate certify(const Mtn& mtn, const StateArray& x_star, const DeltaBarOptions& options) {
  StabilityCertificate cert;
  const Index m = mtn.num_commodities();
  cert.max_real_eigenvalue.resize(m);
  cert.l1_measure.resize(m);
  for (Index k = 0; k < m; ++k) {
    cert.jacobians.push_back(jacobian_free_flow(mtn, x_star, k));
    cert.max_real_eigenvalue(k) = hurwitz_check(cert.jacobians.back()).max_real_part;
    cert.l1_measure(k) = l1_matrix_measure(cert.jacobians.back());
  }
  cert.delta_bar = delta_bar(mtn, x_star, options);
  return cert;
}

NonexpansivenessReport nonexpansiveness_probe(const Mtn& mtn, const InflowArray& lambda,
                                              AllocationRule rule, const StateArray& x,
                                              const StateArray& y, const IntegratorConfig& config) {
  config.validate();
  NonexpansivenessReport report;
  StateArray a = project_state(x);
  StateArray b = project_state(y);
  report.initial_distance = (b - a).lpNorm<1>();
  report.final_distance = report.initial_distance;
  if (!is_free_flow(mtn, a) || !is_free_flow(mtn, b)) {
    report.started_outside = true;
    report.exit_time = 0.0;
    return report;
  }
  double previous = report.initial_distance;
  const long steps = config.num_steps();
  for (long n = 1; n <= steps; ++n) {
    const double t = static_cast<double>(n) * config.dt;
    try {
      a = step(mtn, lambda, rule, a, config);
      b = step(mtn, lambda, rule, b, config);
    } catch (const RuleDomainError&) {
      // Only reachable for FreeFlowOnly, which has no meaning past the boundary.
      report.exit_time = t;
      break;
    }
    if (!is_free_flow(mtn, a) || !is_free_flow(mtn, b)) {
      report.exit_time = t;
      break;
    }
    const double distance = (b - a).lpNorm<1>();
    report.max_growth = std::max(report.max_growth, distance - report.initial_distance);
    report.max_step_increase = std::max(report.max_step_increase, distance - previous);
    report.final_distance = distance;
    report.certified_until = t;
    previous = distance;
  }
  return report;
}

}  // namespace mdfn
