// Command-line front end: validate / regions / equilibrium / simulate / verify.
//
// Exit codes: 0 ok, 1 domain failure (invalid network, infeasible inflow,
// failed property), 2 I/O or parse error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mdfn/analysis.hpp"
#include "mdfn/log.hpp"
#include "mdfn/scenario.hpp"
#include "mdfn/verify.hpp"

namespace {

using nlohmann::json;
using namespace mdfn;

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kIoError = 2;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string tuple(const StateArray& x) {
  std::string out = "(";
  const auto flat = flatten(x);
  for (std::size_t e = 0; e < flat.size(); ++e) out += (e ? ", " : "") + num(flat[e]);
  return out + ")";
}

json matrix_json(const Mtn& mtn, const Eigen::MatrixXd& a) {
  json out = json::object();
  for (Index i = 0; i < mtn.num_cells(); ++i)
    for (Index k = 0; k < mtn.num_commodities(); ++k)
      out[mtn.topology.cell_id(i)][mtn.commodities[static_cast<std::size_t>(k)].id] = a(i, k);
  return out;
}

// Inflow override "v1,v2,..." in (on-ramp, commodity) declaration order.
InflowArray parse_lambda(const Mtn& mtn, const std::string& spec) {
  std::vector<double> values;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) values.push_back(std::stod(item));
  const auto ramps = mtn.topology.onramps();
  if (values.size() != ramps.size() * static_cast<std::size_t>(mtn.num_commodities()))
    throw std::invalid_argument("--lambda expects one value per (on-ramp, commodity) pair");
  InflowArray lambda = Eigen::MatrixXd::Zero(mtn.num_cells(), mtn.num_commodities());
  std::size_t next = 0;
  for (Index i : ramps)
    for (Index k = 0; k < mtn.num_commodities(); ++k) lambda(i, k) = values[next++];
  return lambda;
}

struct Loaded {
  Scenario scenario;
  int status = kOk;
};

// Loads and validates; prints the report on failure.
Loaded load_valid(const std::string& path) {
  Loaded out;
  try {
    out.scenario = load_scenario(path);
  } catch (const ScenarioParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    out.status = kIoError;
    return out;
  }
  const ValidationReport report = validate_scenario(out.scenario);
  if (!report.ok()) {
    std::cout << "invalid scenario:\n" << report.to_string();
    out.status = kDomainFailure;
  }
  return out;
}

int cmd_validate(const std::string& path) {
  const Loaded loaded = load_valid(path);
  if (loaded.status == kOk) {
    const Mtn& mtn = loaded.scenario.mtn;
    std::cout << "valid: " << mtn.num_cells() << " cells, " << mtn.num_commodities() << " commodities, "
              << mtn.topology.onramps().size() << " on-ramps, " << mtn.topology.offramps().size()
              << " off-ramps\n";
  }
  return loaded.status;
}

int cmd_regions(const std::string& path, const std::string& lambda_spec, const std::string& grid_spec,
                const std::string& out_path, bool as_json) {
  Loaded loaded = load_valid(path);
  if (loaded.status != kOk) return loaded.status;
  const Mtn& mtn = loaded.scenario.mtn;
  InflowArray lambda = loaded.scenario.inflows;
  if (!lambda_spec.empty()) lambda = parse_lambda(mtn, lambda_spec);

  const auto region = stability_region_contains(mtn, lambda);
  const Membership bounded = bounded_region_membership(mtn, lambda);

  if (as_json) {
    json doc;
    doc["inflows"] = matrix_json(mtn, lambda);
    doc["in_stability_region"] = region.inside;
    doc["stability_region_boundary"] = region.on_boundary;
    doc["bounded_region"] = std::string(to_string(bounded));
    json cells = json::array();
    for (const auto& c : region.cells)
      cells.push_back({{"cell", mtn.topology.cell_id(c.cell)},
                       {"status", std::string(to_string(c.check.status))},
                       {"slack", std::isnan(c.check.slack) ? json(nullptr) : json(c.check.slack)}});
    doc["cells"] = cells;
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "inflow: " << tuple(lambda) << "\n";
    if (region.inside)
      std::cout << "inside Lambda (free-flow equilibrium exists)\n";
    else if (region.on_boundary)
      std::cout << "on the boundary of Lambda (not inside)\n";
    else
      std::cout << "outside Lambda\n";
    for (const auto& c : region.cells) {
      std::cout << "  cell " << mtn.topology.cell_id(c.cell) << ": " << to_string(c.check.status) << ", slack "
                << (std::isnan(c.check.slack) ? std::string("n/a") : num(c.check.slack));
      if (!c.check.note.empty()) std::cout << " (" << c.check.note << ")";
      std::cout << "\n";
    }
    std::cout << "bounded region Lambda_B: " << to_string(bounded);
    if (bounded == Membership::Boundary) std::cout << " (lambda on the boundary of Lambda_B)";
    std::cout << "\n";
  }

  if (!grid_spec.empty()) {
    std::vector<double> g;
    std::stringstream in(grid_spec);
    std::string item;
    while (std::getline(in, item, ',')) g.push_back(std::stod(item));
    if (g.size() != 5 || g[4] < 2) throw std::invalid_argument("--grid expects a0,a1,b0,b1,n with n >= 2");
    if (mtn.num_commodities() != 2 || mtn.topology.onramps().empty())
      throw std::invalid_argument("--grid needs exactly two commodities and an on-ramp");
    const Index ramp = mtn.topology.onramps().front();
    const int n = static_cast<int>(g[4]);
    std::ofstream csv(out_path.empty() ? "regions.csv" : out_path);
    if (!csv) {
      std::cerr << "cannot write grid CSV\n";
      return kIoError;
    }
    csv << "lambda_a,lambda_b,in_stability_region,in_bounded_region\n";
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) {
        InflowArray point = lambda;
        point(ramp, 0) = g[0] + (g[1] - g[0]) * p / (n - 1);
        point(ramp, 1) = g[2] + (g[3] - g[2]) * q / (n - 1);
        const bool in_stab = stability_region_contains(mtn, point).inside;
        const bool in_bound = bounded_region_membership(mtn, point) != Membership::Outside;
        csv << num(point(ramp, 0)) << ',' << num(point(ramp, 1)) << ',' << int(in_stab) << ',' << int(in_bound) << '\n';
      }
    }
    if (!as_json) std::cout << "grid written to " << (out_path.empty() ? "regions.csv" : out_path) << "\n";
  }
  return kOk;
}

int cmd_equilibrium(const std::string& path, const std::string& csv_path, bool as_json) {
  Loaded loaded = load_valid(path);
  if (loaded.status != kOk) return loaded.status;
  const Scenario& sc = loaded.scenario;
  const Mtn& mtn = sc.mtn;

  EquilibriumResult eq;
  try {
    eq = free_flow_equilibrium(mtn, sc.inflows);
  } catch (const CapacityExceededError& e) {
    std::cout << "lambda not in Lambda: " << e.what() << "\n";
    return kDomainFailure;
  }

  json doc;
  doc["zeta"] = matrix_json(mtn, eq.zeta);
  doc["in_free_flow"] = eq.in_free_flow;
  if (!eq.in_free_flow) {
    json failing = json::array();
    for (Index i : eq.region.failing_cells) failing.push_back(mtn.topology.cell_id(i));
    doc["failing_cells"] = failing;
    if (as_json) {
      std::cout << doc.dump(2) << "\n";
    } else {
      std::cout << "transported inflow zeta: " << tuple(eq.zeta) << "\n";
      std::cout << "lambda not in Lambda: no free-flow equilibrium (failing cells:";
      for (Index i : eq.region.failing_cells) std::cout << " " << mtn.topology.cell_id(i);
      std::cout << ")\n";
    }
    return kDomainFailure;
  }

  const StabilityCertificate cert = certify(mtn, eq.x_star);
  doc["x_star"] = matrix_json(mtn, eq.x_star);
  doc["delta_bar"] = std::isinf(cert.delta_bar.value) ? json("inf") : json(cert.delta_bar.value);
  doc["delta_bar_method"] = std::string(to_string(cert.delta_bar.method));
  doc["hurwitz"] = cert.hurwitz();
  json per = json::object();
  for (Index k = 0; k < mtn.num_commodities(); ++k)
    per[mtn.commodities[static_cast<std::size_t>(k)].id] = {{"max_real_eigenvalue", cert.max_real_eigenvalue(k)},
                                                            {"l1_measure", cert.l1_measure(k)}};
  doc["commodities"] = per;

  if (as_json) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::cout << "transported inflow zeta: " << tuple(eq.zeta) << "\n";
    std::cout << "free-flow equilibrium x*: " << tuple(eq.x_star) << "\n";
    std::cout << "state order: (cell, commodity) in declaration order\n";
    std::cout << "in free flow: yes\n";
    std::cout << "delta_bar: " << (std::isinf(cert.delta_bar.value) ? std::string("inf") : num(cert.delta_bar.value))
              << " (" << to_string(cert.delta_bar.method) << ")\n";
    std::cout << "hurwitz: " << (cert.hurwitz() ? "yes" : "no") << "\n";
    for (Index k = 0; k < mtn.num_commodities(); ++k)
      std::cout << "  commodity " << mtn.commodities[static_cast<std::size_t>(k)].id
                << ": max Re(eig) " << num(cert.max_real_eigenvalue(k)) << ", l1 measure "
                << num(cert.l1_measure(k)) << "\n";
  }

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) {
      std::cerr << "cannot write " << csv_path << "\n";
      return kIoError;
    }
    csv << "cell,commodity,zeta,x_star\n";
    for (Index i = 0; i < mtn.num_cells(); ++i)
      for (Index k = 0; k < mtn.num_commodities(); ++k)
        csv << mtn.topology.cell_id(i) << ',' << mtn.commodities[static_cast<std::size_t>(k)].id << ','
            << num(eq.zeta(i, k)) << ',' << num(eq.x_star(i, k)) << '\n';
  }
  return kOk;
}

int cmd_simulate(const std::string& path, const std::string& out_dir) {
  Loaded loaded = load_valid(path);
  if (loaded.status != kOk) return loaded.status;
  const Scenario& sc = loaded.scenario;
  if (sc.experiments.empty()) {
    std::cout << "scenario has no experiments\n";
    return kDomainFailure;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create " << out_dir << ": " << ec.message() << "\n";
    return kIoError;
  }
  for (const auto& exp : sc.experiments) {
    const InflowArray lambda = exp.inflows.value_or(sc.inflows);
    const AllocationRule rule = exp.rule.value_or(sc.rule);
    IntegratorConfig cfg = sc.integrator;
    if (exp.t_end) cfg.t_end = *exp.t_end;
    for (const auto& init : exp.initial_states) {
      Trajectory traj;
      try {
        traj = integrate(sc.mtn, lambda, rule, init.state, cfg);
      } catch (const std::exception& e) {
        std::cout << exp.name << "/" << init.name << ": integration failed: " << e.what() << "\n";
        return kDomainFailure;
      }
      const auto file = std::filesystem::path(out_dir) / (exp.name + "_" + init.name + ".csv");
      std::ofstream csv(file);
      if (!csv) {
        std::cerr << "cannot write " << file << "\n";
        return kIoError;
      }
      write_trajectory_csv(csv, sc.mtn, traj);
      const double residual = rhs(sc.mtn, traj.final_state(), lambda, rule).lpNorm<1>();
      std::cout << exp.name << "/" << init.name << ": t = " << num(traj.times.back()) << ", x = "
                << tuple(traj.final_state()) << ", |rhs|_1 = " << num(residual) << ", boundary crossings "
                << traj.exit_events.size() << " -> " << file.string() << "\n";
    }
  }
  return kOk;
}

int cmd_verify(const std::string& path, const std::string& suite, std::uint64_t seed, int samples,
               double radius_factor) {
  Loaded loaded = load_valid(path);
  if (loaded.status != kOk) return loaded.status;
  VerifyOptions options;
  options.suite = parse_suite(suite);
  options.seed = seed;
  options.samples = samples;
  options.radius_factor = radius_factor;
  const VerifyReport report = run_verification(loaded.scenario, options);
  std::cout << report.to_string();
  std::cout << (report.passed() ? "all suites passed\n" : "verification failed\n");
  return report.passed() ? kOk : kDomainFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-commodity dynamical flow network toolkit"};
  app.require_subcommand(1);

  std::string file;
  auto* validate = app.add_subcommand("validate", "Check a scenario against the network assumptions");
  validate->add_option("file", file, "Scenario JSON")->required();

  std::string lambda_spec;
  std::string grid_spec;
  std::string out_path;
  bool as_json = false;
  auto* regions = app.add_subcommand("regions", "Stability and bounded region membership");
  regions->add_option("file", file, "Scenario JSON")->required();
  regions->add_option("--lambda", lambda_spec, "Inflow override, one value per (on-ramp, commodity)");
  regions->add_option("--grid", grid_spec, "a0,a1,b0,b1,n: sweep the first on-ramp's two inflows");
  regions->add_option("--out", out_path, "Grid CSV path (default regions.csv)");
  regions->add_flag("--json", as_json, "Machine-readable output");

  std::string csv_path;
  auto* equilibrium = app.add_subcommand("equilibrium", "Free-flow equilibrium and stability certificate");
  equilibrium->add_option("file", file, "Scenario JSON")->required();
  equilibrium->add_option("--csv", csv_path, "Write zeta and x* as CSV");
  equilibrium->add_flag("--json", as_json, "Machine-readable output");

  std::string out_dir = ".";
  auto* simulate = app.add_subcommand("simulate", "Integrate every experiment and write trajectory CSVs");
  simulate->add_option("file", file, "Scenario JSON")->required();
  simulate->add_option("--out", out_dir, "Output directory");

  std::string suite = "all";
  std::uint64_t seed = 0;
  int samples = 100;
  double radius_factor = 1.0;
  auto* verify = app.add_subcommand("verify", "Run property suites");
  verify->add_option("file", file, "Scenario JSON")->required();
  verify->add_option("--suite", suite, "contraction, jacobian, regions or all")->required();
  verify->add_option("--seed", seed, "Random seed");
  verify->add_option("--samples", samples, "Samples per suite");
  verify->add_option("--radius-factor", radius_factor, "Contraction probe radius as a multiple of delta_bar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIoError;
  }

  logger()->info("command {} on {}", app.get_subcommands().front()->get_name(), file);
  try {
    if (*validate) return cmd_validate(file);
    if (*regions) return cmd_regions(file, lambda_spec, grid_spec, out_path, as_json);
    if (*equilibrium) return cmd_equilibrium(file, csv_path, as_json);
    if (*simulate) return cmd_simulate(file, out_dir);
    if (*verify) return cmd_verify(file, suite, seed, samples, radius_factor);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kOk;
}
