#include "mdfn/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mdfn {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ScenarioParseError(path + ": " + message);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::string text(const json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(path, "expected a string");
}

PiecewiseLinear table(const json& v, const std::string& path) {
  const json& pts = require(v, "points", path);
  if (!pts.is_array() || pts.size() < 2) fail(path + ".points", "expected at least two [x, y] pairs");
  PiecewiseLinear out;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const std::string at = path + ".points[" + std::to_string(p) + "]";
    if (!pts[p].is_array() || pts[p].size() != 2) fail(at, "expected [x, y]");
    const double x = number(pts[p][0], at);
    if (!out.xs.empty() && !(x > out.xs.back())) fail(at, "x values must be strictly increasing");
    out.xs.push_back(x);
    out.ys.push_back(number(pts[p][1], at));
  }
  return out;
}

DemandFunction demand_from(const json& v, const std::string& path) {
  const std::string kind = text(require(v, "kind", path), path + ".kind");
  if (kind == "linear") return DemandFunction::linear(number(require(v, "slope", path), path + ".slope"));
  if (kind == "saturating")
    return DemandFunction::saturating(number(require(v, "vmax", path), path + ".vmax"),
                                      number(require(v, "half", path), path + ".half"));
  if (kind == "table") return DemandFunction(TabulatedDemand{table(v, path)});
  fail(path + ".kind", "unknown demand kind '" + kind + "' (linear, saturating, table)");
}

SupplyFunction supply_from(const json& v, const std::string& path) {
  const std::string kind = text(require(v, "kind", path), path + ".kind");
  if (kind == "affine")
    return SupplyFunction::affine(number(require(v, "intercept", path), path + ".intercept"),
                                  v.contains("slope") ? number(v["slope"], path + ".slope") : 0.0);
  if (kind == "table") return SupplyFunction(TabulatedSupply{table(v, path)});
  fail(path + ".kind", "unknown supply kind '" + kind + "' (affine, table)");
}

json points_json(const PiecewiseLinear& t) {
  json pts = json::array();
  for (std::size_t p = 0; p < t.xs.size(); ++p) pts.push_back({t.xs[p], t.ys[p]});
  return pts;
}

json demand_json(const DemandFunction& d) {
  if (const auto* v = std::get_if<LinearDemand>(&d.kind())) return {{"kind", "linear"}, {"slope", v->slope}};
  if (const auto* v = std::get_if<SaturatingDemand>(&d.kind()))
    return {{"kind", "saturating"}, {"vmax", v->vmax}, {"half", v->half}};
  if (const auto* v = std::get_if<TabulatedDemand>(&d.kind()))
    return {{"kind", "table"}, {"points", points_json(v->table)}};
  throw std::invalid_argument("custom demand functions cannot be serialized");
}

json supply_json(const SupplyFunction& s) {
  if (const auto* v = std::get_if<AffineSupply>(&s.kind()))
    return {{"kind", "affine"}, {"intercept", v->intercept}, {"slope", v->slope}};
  if (const auto* v = std::get_if<TabulatedSupply>(&s.kind()))
    return {{"kind", "table"}, {"points", points_json(v->table)}};
  throw std::invalid_argument("custom supply functions cannot be serialized");
}

Index cell_index(const Mtn& mtn, const std::string& id, const std::string& path) {
  const auto i = mtn.topology.find_cell(id);
  if (!i) fail(path, "unknown cell '" + id + "'");
  return *i;
}

Index commodity_index(const Mtn& mtn, const std::string& id, const std::string& path) {
  const auto k = mtn.find_commodity(id);
  if (!k) fail(path, "unknown commodity '" + id + "'");
  return *k;
}

// {"cell": {"commodity": value}}; unspecified entries are zero.
Eigen::MatrixXd cell_commodity_array(const Mtn& mtn, const json& v, const std::string& path) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mtn.num_cells(), mtn.num_commodities());
  if (!v.is_object()) fail(path, "expected an object keyed by cell id");
  for (const auto& [cell, per] : v.items()) {
    const std::string at = path + "." + cell;
    const Index i = cell_index(mtn, cell, at);
    if (!per.is_object()) fail(at, "expected an object keyed by commodity id");
    for (const auto& [com, value] : per.items())
      out(i, commodity_index(mtn, com, at + "." + com)) = number(value, at + "." + com);
  }
  return out;
}

json cell_commodity_json(const Mtn& mtn, const Eigen::MatrixXd& a) {
  json out = json::object();
  for (Index i = 0; i < mtn.num_cells(); ++i) {
    json per = json::object();
    for (Index k = 0; k < mtn.num_commodities(); ++k)
      if (a(i, k) != 0.0) per[mtn.commodities[static_cast<std::size_t>(k)].id] = a(i, k);
    if (!per.empty()) out[mtn.topology.cell_id(i)] = per;
  }
  return out;
}

IntegratorConfig integrator_from(const json& v, const std::string& path) {
  IntegratorConfig cfg;
  if (!v.is_object()) fail(path, "expected an object");
  if (v.contains("method")) {
    try {
      cfg.method = parse_method(text(v["method"], path + ".method"));
    } catch (const std::invalid_argument& e) {
      fail(path + ".method", e.what());
    }
  }
  if (v.contains("dt")) cfg.dt = number(v["dt"], path + ".dt");
  if (v.contains("t_end")) cfg.t_end = number(v["t_end"], path + ".t_end");
  if (v.contains("record_every")) {
    if (!v["record_every"].is_number_integer()) fail(path + ".record_every", "expected an integer");
    cfg.record_every = v["record_every"].get<int>();
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return cfg;
}

AllocationRule rule_from(const json& v, const std::string& path) {
  try {
    return parse_rule(text(v, path));
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) fail("$", "scenario must be a JSON object");
  Scenario sc;

  const std::string world = doc.contains("world") ? text(doc["world"], "world") : "w";
  const json& cells = require(doc, "cells", "$");
  if (!cells.is_array()) fail("cells", "expected an array");
  std::vector<CellSpec> specs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::string at = "cells[" + std::to_string(c) + "]";
    specs.push_back({text(require(cells[c], "id", at), at + ".id"),
                     text(require(cells[c], "tail", at), at + ".tail"),
                     text(require(cells[c], "head", at), at + ".head")});
  }
  sc.mtn.topology = NetworkTopology(std::move(specs), world);
  Mtn& mtn = sc.mtn;
  const Index n = mtn.num_cells();

  if (doc.contains("validation")) {
    const json& v = doc["validation"];
    if (v.contains("xi_max")) sc.grid.xi_max = number(v["xi_max"], "validation.xi_max");
    if (v.contains("points")) sc.grid.points = static_cast<int>(number(v["points"], "validation.points"));
  }

  // Supplies: optional default plus per-cell overrides, on non-onramp cells.
  mtn.supplies.assign(static_cast<std::size_t>(n), std::nullopt);
  std::optional<SupplyFunction> default_supply;
  if (doc.contains("supply")) default_supply = supply_from(doc["supply"], "supply");
  for (Index i = 0; i < n; ++i)
    if (!mtn.topology.is_onramp(i)) mtn.supplies[static_cast<std::size_t>(i)] = default_supply;
  if (doc.contains("supplies")) {
    const json& per = doc["supplies"];
    if (!per.is_object()) fail("supplies", "expected an object keyed by cell id");
    for (const auto& [cell, fn] : per.items()) {
      const Index i = cell_index(mtn, cell, "supplies." + cell);
      if (mtn.topology.is_onramp(i)) fail("supplies." + cell, "on-ramp cells carry no supply function");
      mtn.supplies[static_cast<std::size_t>(i)] = supply_from(fn, "supplies." + cell);
    }
  }

  const json& coms = require(doc, "commodities", "$");
  if (!coms.is_array()) fail("commodities", "expected an array");
  // Commodity ids first so routing/demand errors can refer to them.
  for (std::size_t k = 0; k < coms.size(); ++k) {
    const std::string at = "commodities[" + std::to_string(k) + "]";
    mtn.commodities.push_back({text(require(coms[k], "id", at), at + ".id"), Eigen::MatrixXd::Zero(n, n), {}});
  }
  for (std::size_t k = 0; k < coms.size(); ++k) {
    const std::string at = "commodities[" + std::to_string(k) + "]";
    CommoditySpec& com = mtn.commodities[k];
    const json& c = coms[k];

    std::optional<DemandFunction> default_demand;
    if (c.contains("demand")) default_demand = demand_from(c["demand"], at + ".demand");
    std::vector<std::optional<DemandFunction>> per_cell(static_cast<std::size_t>(n), default_demand);
    if (c.contains("demands")) {
      if (!c["demands"].is_object()) fail(at + ".demands", "expected an object keyed by cell id");
      for (const auto& [cell, fn] : c["demands"].items()) {
        const Index i = cell_index(mtn, cell, at + ".demands." + cell);
        per_cell[static_cast<std::size_t>(i)] = demand_from(fn, at + ".demands." + cell);
      }
    }
    for (Index i = 0; i < n; ++i) {
      if (!per_cell[static_cast<std::size_t>(i)])
        fail(at, "no demand function for cell '" + mtn.topology.cell_id(i) + "' (set 'demand' or 'demands')");
      com.demands.push_back(*per_cell[static_cast<std::size_t>(i)]);
    }

    if (c.contains("routing")) {
      const json& entries = c["routing"];
      if (!entries.is_array()) fail(at + ".routing", "expected an array of {from, to, ratio}");
      for (std::size_t e = 0; e < entries.size(); ++e) {
        const std::string rat = at + ".routing[" + std::to_string(e) + "]";
        const Index from = cell_index(mtn, text(require(entries[e], "from", rat), rat + ".from"), rat + ".from");
        const Index to = cell_index(mtn, text(require(entries[e], "to", rat), rat + ".to"), rat + ".to");
        com.routing(from, to) = number(require(entries[e], "ratio", rat), rat + ".ratio");
      }
    }
  }

  sc.inflows = doc.contains("inflows") ? cell_commodity_array(mtn, doc["inflows"], "inflows")
                                       : Eigen::MatrixXd::Zero(n, mtn.num_commodities());
  if (doc.contains("rule")) sc.rule = rule_from(doc["rule"], "rule");
  if (doc.contains("integrator")) sc.integrator = integrator_from(doc["integrator"], "integrator");

  if (doc.contains("experiments")) {
    const json& exps = doc["experiments"];
    if (!exps.is_array()) fail("experiments", "expected an array");
    for (std::size_t e = 0; e < exps.size(); ++e) {
      const std::string at = "experiments[" + std::to_string(e) + "]";
      const json& x = exps[e];
      Experiment exp;
      exp.name = x.contains("name") ? text(x["name"], at + ".name") : "experiment" + std::to_string(e);
      if (x.contains("inflows")) exp.inflows = cell_commodity_array(mtn, x["inflows"], at + ".inflows");
      if (x.contains("rule")) exp.rule = rule_from(x["rule"], at + ".rule");
      if (x.contains("t_end")) exp.t_end = number(x["t_end"], at + ".t_end");
      const json& inits = require(x, "initial_states", at);
      if (!inits.is_array()) fail(at + ".initial_states", "expected an array");
      for (std::size_t s = 0; s < inits.size(); ++s) {
        const std::string sat = at + ".initial_states[" + std::to_string(s) + "]";
        NamedState st;
        st.name = inits[s].contains("name") ? text(inits[s]["name"], sat + ".name") : "x" + std::to_string(s);
        st.state = inits[s].contains("state") ? cell_commodity_array(mtn, inits[s]["state"], sat + ".state")
                                              : mtn.zero_state();
        if (st.state.minCoeff() < 0.0) fail(sat + ".state", "initial densities must be >= 0");
        exp.initial_states.push_back(std::move(st));
      }
      sc.experiments.push_back(std::move(exp));
    }
  }
  return sc;
}

Scenario parse_scenario_text(const std::string& content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, content.size());
    const long line = 1 + std::count(content.begin(), content.begin() + static_cast<long>(upto), '\n');
    throw ScenarioParseError("line " + std::to_string(line) + ": " + e.what());
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioParseError(path + ": cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_scenario_text(buffer.str());
  } catch (const ScenarioParseError& e) {
    throw ScenarioParseError(path + ": " + e.what());
  }
}

json to_json(const Scenario& sc) {
  const Mtn& mtn = sc.mtn;
  json doc;
  doc["world"] = mtn.topology.world();
  json cells = json::array();
  for (const auto& c : mtn.topology.cells()) cells.push_back({{"id", c.id}, {"tail", c.tail}, {"head", c.head}});
  doc["cells"] = cells;

  json supplies = json::object();
  for (Index i = 0; i < mtn.num_cells(); ++i)
    if (const auto& s = mtn.supplies[static_cast<std::size_t>(i)]) supplies[mtn.topology.cell_id(i)] = supply_json(*s);
  doc["supplies"] = supplies;

  json coms = json::array();
  for (const auto& com : mtn.commodities) {
    json c;
    c["id"] = com.id;
    json routing = json::array();
    for (Index i = 0; i < com.routing.rows(); ++i)
      for (Index j = 0; j < com.routing.cols(); ++j)
        if (com.routing(i, j) != 0.0)
          routing.push_back({{"from", mtn.topology.cell_id(i)}, {"to", mtn.topology.cell_id(j)}, {"ratio", com.routing(i, j)}});
    c["routing"] = routing;
    json demands = json::object();
    for (std::size_t i = 0; i < com.demands.size(); ++i)
      demands[mtn.topology.cell_id(static_cast<Index>(i))] = demand_json(com.demands[i]);
    c["demands"] = demands;
    coms.push_back(c);
  }
  doc["commodities"] = coms;
  doc["inflows"] = cell_commodity_json(mtn, sc.inflows);
  doc["rule"] = std::string(to_string(sc.rule));
  doc["integrator"] = {{"method", std::string(to_string(sc.integrator.method))},
                       {"dt", sc.integrator.dt},
                       {"t_end", sc.integrator.t_end},
                       {"record_every", sc.integrator.record_every}};
  doc["validation"] = {{"xi_max", sc.grid.xi_max}, {"points", sc.grid.points}};

  json exps = json::array();
  for (const auto& e : sc.experiments) {
    json x;
    x["name"] = e.name;
    if (e.inflows) x["inflows"] = cell_commodity_json(mtn, *e.inflows);
    if (e.rule) x["rule"] = std::string(to_string(*e.rule));
    if (e.t_end) x["t_end"] = *e.t_end;
    json inits = json::array();
    for (const auto& s : e.initial_states) inits.push_back({{"name", s.name}, {"state", cell_commodity_json(mtn, s.state)}});
    x["initial_states"] = inits;
    exps.push_back(x);
  }
  doc["experiments"] = exps;
  return doc;
}

ValidationReport validate_inflows(const Mtn& mtn, const InflowArray& lambda) {
  ValidationReport report;
  if (lambda.rows() != mtn.num_cells() || lambda.cols() != mtn.num_commodities()) {
    report.violations.push_back({"structure", "", "", "inflow array has the wrong shape"});
    return report;
  }
  for (Index i = 0; i < lambda.rows(); ++i) {
    for (Index k = 0; k < lambda.cols(); ++k) {
      const double v = lambda(i, k);
      const auto& cell = mtn.topology.cell_id(i);
      const auto& com = mtn.commodities[static_cast<std::size_t>(k)].id;
      if (!(v >= 0.0)) report.violations.push_back({"inflow", cell, com, "negative exogenous inflow"});
      else if (v != 0.0 && !mtn.topology.is_onramp(i))
        report.violations.push_back({"inflow", cell, com, "exogenous inflow on a non-onramp cell"});
    }
  }
  return report;
}

ValidationReport validate_scenario(const Scenario& sc) {
  ValidationOptions options;
  options.grid = sc.grid;
  ValidationReport report = validate_mtn(sc.mtn, options);
  if (!report.ok()) return report;
  auto merge = [&](const ValidationReport& other) {
    report.violations.insert(report.violations.end(), other.violations.begin(), other.violations.end());
  };
  merge(validate_inflows(sc.mtn, sc.inflows));
  for (const auto& e : sc.experiments) {
    if (e.inflows) merge(validate_inflows(sc.mtn, *e.inflows));
    for (const auto& s : e.initial_states)
      if (s.state.minCoeff() < 0.0)
        report.violations.push_back({"state", "", "", "experiment " + e.name + ": negative initial density"});
  }
  return report;
}

InflowArray diverge_inflow(const Mtn& mtn, double lambda_a, double lambda_b) {
  InflowArray lambda = Eigen::MatrixXd::Zero(mtn.num_cells(), mtn.num_commodities());
  lambda(0, 0) = lambda_a;
  lambda(0, 1) = lambda_b;
  return lambda;
}

StateArray diverge_state(const Mtn& mtn, const std::vector<double>& tuple) {
  if (tuple.size() != 5) throw std::invalid_argument("diverge_state expects 5 components");
  StateArray x = mtn.zero_state();
  x(0, 0) = tuple[0];
  x(0, 1) = tuple[1];
  x(1, 0) = tuple[2];
  x(1, 1) = tuple[3];
  x(2, 0) = tuple[4];
  return x;
}

Scenario diverge_junction_scenario() {
  Scenario sc;
  Mtn& mtn = sc.mtn;
  mtn.topology = NetworkTopology({{"1", "w", "v"}, {"2", "v", "w"}, {"3", "v", "w"}}, "w");
  const auto linear = DemandFunction::linear(1.0);
  CommoditySpec a{"a", Eigen::MatrixXd::Zero(3, 3), {linear, linear, linear}};
  a.routing(0, 1) = 0.5;
  a.routing(0, 2) = 0.5;
  CommoditySpec b{"b", Eigen::MatrixXd::Zero(3, 3), {linear, linear, linear}};
  b.routing(0, 1) = 1.0;
  mtn.commodities = {a, b};
  mtn.supplies = {std::nullopt, SupplyFunction::affine(2.0, 1.0), SupplyFunction::affine(2.0, 1.0)};

  sc.inflows = diverge_inflow(mtn, 0.5, 0.5);
  sc.rule = AllocationRule::NonFifo;
  sc.integrator.dt = 1e-2;
  sc.integrator.t_end = 200.0;
  sc.integrator.record_every = 10;

  const std::vector<NamedState> initials = {
      {"x0", mtn.zero_state()},
      {"x0_tilde", diverge_state(mtn, {3.0, 2.0, 1.5, 0.5, 1.0})},
  };
  sc.experiments = {
      {"A", diverge_inflow(mtn, 0.5, 0.5), std::nullopt, std::nullopt, initials},
      {"B", diverge_inflow(mtn, 1.2, 0.5), std::nullopt, std::nullopt, initials},
      {"C", diverge_inflow(mtn, 1.5, 0.5), std::nullopt, std::nullopt, initials},
  };
  return sc;
}

}  // namespace mdfn
