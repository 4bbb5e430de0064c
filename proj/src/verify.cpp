#include "mdfn/verify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

#include "mdfn/analysis.hpp"
#include "mdfn/log.hpp"

namespace mdfn {

namespace {

std::string dump(const StateArray& x) {
  std::ostringstream out;
  out.precision(12);
  out << "(";
  const auto flat = flatten(x);
  for (std::size_t e = 0; e < flat.size(); ++e) out << (e ? ", " : "") << flat[e];
  out << ")";
  return out.str();
}

std::string fmt_double(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

// Uniform direction on the l1 sphere, radius scaled to stay strictly inside
// the ball, then projected onto X (which only shortens the distance).
StateArray sample_in_ball(const StateArray& center, double radius, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  StateArray dir(center.rows(), center.cols());
  double total = 0.0;
  for (Index e = 0; e < dir.size(); ++e) {
    dir(e) = expo(rng) * (unit(rng) < 0.5 ? -1.0 : 1.0);
    total += std::abs(dir(e));
  }
  const double r = radius * unit(rng) * (1.0 - 1e-9);
  return (center + (r / total) * dir).cwiseMax(0.0);
}

// Free-flow state with slack above `margin`, from a box sized by `scale`.
std::optional<StateArray> sample_free_flow(const Mtn& mtn, double scale, double margin,
                                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  StateArray x(mtn.num_cells(), mtn.num_commodities());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double shrink = std::pow(0.5, attempt / 100);
    for (Index e = 0; e < x.size(); ++e) x(e) = scale * shrink * unit(rng);
    if (min_free_flow_slack(mtn, x) > margin) return x;
  }
  return std::nullopt;
}

SuiteResult contraction_suite(const Scenario& sc, const VerifyOptions& options, std::mt19937_64& rng) {
  SuiteResult result{"contraction", true, {}, std::nullopt};
  const Mtn& mtn = sc.mtn;
  const auto region = stability_region_contains(mtn, sc.inflows);
  if (!region.inside) {
    result.passed = false;
    result.lines.push_back("inflow is outside the stability region: no free-flow equilibrium to probe");
    return result;
  }
  const EquilibriumResult eq = free_flow_equilibrium(mtn, sc.inflows);
  const DeltaBar db = delta_bar(mtn, eq.x_star, DeltaBarOptions{120, 48, 20000, options.seed});
  const double base = std::isinf(db.value) ? 1.0 : db.value;
  const double radius = options.radius_factor * base;
  const bool certified = options.radius_factor <= 1.0;
  result.lines.push_back("delta_bar = " + fmt_double(db.value) + " (" + std::string(to_string(db.method)) +
                         "), probe radius = " + fmt_double(radius));

  int exits = 0;
  double worst_step = 0.0;
  double worst_growth = 0.0;
  double shortest_window = options.probe.t_end;
  for (int p = 0; p < options.samples; ++p) {
    const StateArray x = sample_in_ball(eq.x_star, radius, rng);
    const StateArray y = sample_in_ball(eq.x_star, radius, rng);
    const auto report = nonexpansiveness_probe(mtn, sc.inflows, sc.rule, x, y, options.probe);
    if (report.exit_time) {
      ++exits;
      shortest_window = std::min(shortest_window, report.certified_until);
    }
    worst_step = std::max(worst_step, report.max_step_increase);
    worst_growth = std::max(worst_growth, report.max_growth);
    const bool grew = report.max_step_increase > kNonexpansiveSlack;
    if (certified && (grew || report.exit_time) && !result.counterexample) {
      result.passed = false;
      std::ostringstream ce;
      ce << "x = " << dump(x) << ", y = " << dump(y) << ", initial distance " << report.initial_distance
         << ", max step increase " << report.max_step_increase << ", max growth " << report.max_growth;
      if (report.exit_time) ce << ", left the free-flow region at t = " << *report.exit_time;
      result.counterexample = ce.str();
    }
  }
  result.lines.push_back(std::to_string(options.samples) + " pairs, horizon " + fmt_double(options.probe.t_end) +
                         ": max step increase " + fmt_double(worst_step) + ", max growth " +
                         fmt_double(worst_growth));
  if (exits > 0)
    result.lines.push_back(std::to_string(exits) + " pairs left the free-flow region; shortest certified window " +
                           fmt_double(shortest_window) + (certified ? "" : " (truncated, outside the certified ball)"));
  return result;
}

SuiteResult jacobian_suite(const Scenario& sc, const VerifyOptions& options, std::mt19937_64& rng) {
  SuiteResult result{"jacobian", true, {}, std::nullopt};
  const Mtn& mtn = sc.mtn;
  const Index n = mtn.num_cells();
  const Index m = mtn.num_commodities();

  std::vector<StateArray> points;
  double scale = 1.0;
  const auto region = stability_region_contains(mtn, sc.inflows);
  if (region.inside) {
    const EquilibriumResult eq = free_flow_equilibrium(mtn, sc.inflows);
    points.push_back(eq.x_star);
    scale = std::max(1.0, 2.0 * eq.x_star.maxCoeff());
    for (Index k = 0; k < m; ++k) {
      const auto h = hurwitz_check(jacobian_free_flow(mtn, eq.x_star, k));
      result.lines.push_back("commodity " + mtn.commodities[static_cast<std::size_t>(k)].id +
                             ": max Re(eig) = " + fmt_double(h.max_real_part));
      if (h.max_real_part >= -kNonexpansiveSlack && !result.counterexample) {
        result.passed = false;
        result.counterexample = "Jacobian at x* = " + dump(eq.x_star) + " is not Hurwitz";
      }
    }
  } else {
    result.lines.push_back("inflow outside the stability region: checking random free-flow states only");
  }
  for (int p = 0; p < options.samples; ++p)
    if (auto x = sample_free_flow(mtn, scale, 10 * kFiniteDifferenceStep, rng)) points.push_back(*x);

  double worst_fd = 0.0;
  double worst_measure = -std::numeric_limits<double>::infinity();
  for (const auto& x : points) {
    const Eigen::MatrixXd fd = finite_difference_jacobian(mtn, x, sc.inflows, AllocationRule::FreeFlowOnly);
    Eigen::MatrixXd analytic = Eigen::MatrixXd::Zero(n * m, n * m);
    for (Index k = 0; k < m; ++k) {
      const Eigen::MatrixXd jac = jacobian_free_flow(mtn, x, k);
      worst_measure = std::max(worst_measure, l1_matrix_measure(jac));
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) analytic(i * m + k, j * m + k) = jac(i, j);
    }
    const double err = (fd - analytic).cwiseAbs().maxCoeff();
    worst_fd = std::max(worst_fd, err);
    if ((err > kFiniteDifferenceTolerance || worst_measure > kMeasureTolerance) && !result.counterexample) {
      result.passed = false;
      result.counterexample = "x = " + dump(x) + ": finite-difference error " + fmt_double(err) +
                              ", l1 measure " + fmt_double(worst_measure);
    }
  }
  result.lines.push_back(std::to_string(points.size()) + " free-flow states: max |J - J_fd| = " +
                         fmt_double(worst_fd) + ", max l1 measure = " + fmt_double(worst_measure));
  return result;
}

double flow_difference(const FlowField& a, const FlowField& b) {
  double worst = (a.outflows - b.outflows).cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < a.flows.size(); ++k)
    worst = std::max(worst, (a.flows[k] - b.flows[k]).cwiseAbs().maxCoeff());
  return worst;
}

SuiteResult regions_suite(const Scenario& sc, const VerifyOptions& options, std::mt19937_64& rng) {
  SuiteResult result{"regions", true, {}, std::nullopt};
  const Mtn& mtn = sc.mtn;

  // Rule agreement on the free-flow region.
  double worst = 0.0;
  int checked = 0;
  for (int p = 0; p < options.samples; ++p) {
    const auto x = sample_free_flow(mtn, 2.0, 0.0, rng);
    if (!x) continue;
    ++checked;
    const FlowField base = flows_free(mtn, *x);
    const double diff = std::max(flow_difference(base, flows_fifo(mtn, *x)), flow_difference(base, flows_nonfifo(mtn, *x)));
    worst = std::max(worst, diff);
    if (diff > kRuleAgreementTolerance && !result.counterexample) {
      result.passed = false;
      result.counterexample = "rules disagree at free-flow state " + dump(*x) + " by " + fmt_double(diff);
    }
  }
  result.lines.push_back("rule agreement on " + std::to_string(checked) + " free-flow states: max difference " +
                         fmt_double(worst));

  // Equilibrium construction along the ray t * lambda.
  const std::vector<double> scales = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0};
  int inside = 0;
  for (double t : scales) {
    const InflowArray lambda = t * sc.inflows;
    const auto region = stability_region_contains(mtn, lambda);
    EquilibriumResult eq;
    try {
      eq = free_flow_equilibrium(mtn, lambda);
    } catch (const CapacityExceededError&) {
      if (region.inside && !result.counterexample) {
        result.passed = false;
        result.counterexample = "scale " + fmt_double(t) + ": inside the stability region but demand inversion failed";
      }
      continue;
    }
    if (!region.inside) continue;
    ++inside;
    for (AllocationRule rule : {AllocationRule::FreeFlowOnly, AllocationRule::Fifo, AllocationRule::NonFifo}) {
      const double residual = rhs(mtn, eq.x_star, lambda, rule).lpNorm<1>();
      if (residual >= kEquilibriumResidual && !result.counterexample) {
        result.passed = false;
        result.counterexample = "scale " + fmt_double(t) + ", rule " + std::string(to_string(rule)) +
                                ": |rhs(x*)|_1 = " + fmt_double(residual) + " at x* = " + dump(eq.x_star);
      }
    }
    if (!is_free_flow(mtn, eq.x_star) && !result.counterexample) {
      result.passed = false;
      result.counterexample = "scale " + fmt_double(t) + ": constructed x* is not in the free-flow region";
    }
  }
  result.lines.push_back("equilibrium construction: " + std::to_string(inside) + " of " +
                         std::to_string(scales.size()) + " inflow scalings inside the stability region, all with zero residual");
  return result;
}

}  // namespace

Suite parse_suite(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "contraction") return Suite::Contraction;
  if (lower == "jacobian") return Suite::Jacobian;
  if (lower == "regions") return Suite::Regions;
  if (lower == "all") return Suite::All;
  throw std::invalid_argument("unknown suite '" + std::string(name) + "' (contraction, jacobian, regions, all)");
}

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

std::string VerifyReport::to_string() const {
  std::ostringstream out;
  for (const auto& s : suites) {
    out << (s.passed ? "PASS " : "FAIL ") << s.name << "\n";
    for (const auto& line : s.lines) out << "  " << line << "\n";
    if (s.counterexample) out << "  counterexample: " << *s.counterexample << "\n";
  }
  return out.str();
}

Eigen::MatrixXd finite_difference_jacobian(const Mtn& mtn, const StateArray& x, const InflowArray& lambda,
                                           AllocationRule rule, double h) {
  const Index n = mtn.num_cells();
  const Index m = mtn.num_commodities();
  Eigen::MatrixXd jac(n * m, n * m);
  for (Index j = 0; j < n; ++j) {
    for (Index l = 0; l < m; ++l) {
      StateArray up = x;
      StateArray down = x;
      up(j, l) += h;
      // One-sided at the orthant boundary.
      const double back = std::min(h, x(j, l));
      down(j, l) -= back;
      const Eigen::MatrixXd diff = (rhs(mtn, up, lambda, rule) - rhs(mtn, down, lambda, rule)) / (h + back);
      for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < m; ++k) jac(i * m + k, j * m + l) = diff(i, k);
    }
  }
  return jac;
}

VerifyReport run_verification(const Scenario& scenario, const VerifyOptions& options) {
  VerifyReport report;
  std::mt19937_64 rng(options.seed);
  const bool all = options.suite == Suite::All;
  if (all || options.suite == Suite::Contraction) report.suites.push_back(contraction_suite(scenario, options, rng));
  if (all || options.suite == Suite::Jacobian) report.suites.push_back(jacobian_suite(scenario, options, rng));
  if (all || options.suite == Suite::Regions) report.suites.push_back(regions_suite(scenario, options, rng));
  for (const auto& s : report.suites) logger()->info("suite {}: {}", s.name, s.passed ? "pass" : "fail");
  return report;
}

}  // namespace mdfn
