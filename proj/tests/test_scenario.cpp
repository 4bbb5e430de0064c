#include "doctest.h"

#include <fstream>
#include <random>
#include <sstream>

#include "mdfn/scenario.hpp"
#include "support/random_network.hpp"

using namespace mdfn;
using nlohmann::json;

#ifndef MDFN_SOURCE_DIR
#error "MDFN_SOURCE_DIR must point at the repository root"
#endif

namespace {

std::string bundled() { return std::string(MDFN_SOURCE_DIR) + "/scenarios/diverge.json"; }

std::string minimal_text() {
  return R"({
  "world": "w",
  "cells": [{"id": "in", "tail": "w", "head": "v"}, {"id": "out", "tail": "v", "head": "w"}],
  "supply": {"kind": "affine", "intercept": 2, "slope": 1},
  "commodities": [{"id": "a", "demand": {"kind": "linear", "slope": 1},
                   "routing": [{"from": "in", "to": "out", "ratio": 1}]}],
  "inflows": {"in": {"a": 0.4}}
})";
}

}  // namespace

TEST_CASE("bundled scenario equals the built-in diverge junction") {
  const Scenario file = load_scenario(bundled());
  const Scenario built = diverge_junction_scenario();
  CHECK(to_json(file) == to_json(built));
  CHECK(validate_scenario(file).ok());
  CHECK(file.experiments.size() == 3);
  CHECK(file.experiments[1].initial_states.size() == 2);
}

TEST_CASE("defaults and overrides") {
  const Scenario sc = parse_scenario_text(minimal_text());
  CHECK(sc.mtn.num_cells() == 2);
  CHECK(sc.inflows(0, 0) == 0.4);
  CHECK(sc.rule == AllocationRule::NonFifo);
  CHECK(sc.integrator.method == IntegratorMethod::Rk4);
  CHECK_FALSE(sc.mtn.supplies[0].has_value());
  CHECK(sc.mtn.supply(1)(0.5) == doctest::Approx(1.5));
  CHECK(validate_scenario(sc).ok());
}

TEST_CASE("json round trip") {
  const Scenario sc = diverge_junction_scenario();
  const Scenario back = parse_scenario(to_json(sc));
  CHECK(to_json(back) == to_json(sc));
  CHECK((back.mtn.routing(0) - sc.mtn.routing(0)).norm() == 0.0);
  CHECK(back.experiments[2].inflows.has_value());
  CHECK((*back.experiments[2].inflows - diverge_inflow(sc.mtn, 1.5, 0.5)).norm() == 0.0);

  Scenario tab = parse_scenario_text(minimal_text());
  tab.mtn.commodities[0].demands[1] = DemandFunction{TabulatedDemand{{{0.0, 1.0}, {0.0, 2.0}}}};
  tab.mtn.commodities[0].demands[0] = DemandFunction::saturating(3.0, 0.5);
  CHECK(to_json(parse_scenario(to_json(tab))) == to_json(tab));
}

TEST_CASE("property: random networks survive the round trip") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = testing::random_case(rng);
    const Scenario sc = testing::as_scenario(c);
    const Scenario back = parse_scenario(to_json(sc));
    CHECK(to_json(back) == to_json(sc));
    for (Index k = 0; k < sc.mtn.num_commodities(); ++k) CHECK((back.mtn.routing(k) - sc.mtn.routing(k)).norm() == 0.0);
  }
}

TEST_CASE("parse errors") {
  SUBCASE("syntax error reports the line") {
    try {
      parse_scenario_text("{\n  \"world\": \"w\",\n  \"cells\": [\n}");
      FAIL("expected a parse error");
    } catch (const ScenarioParseError& e) {
      CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
  }
  SUBCASE("unknown cell in routing") {
    json doc = json::parse(minimal_text());
    doc["commodities"][0]["routing"][0]["to"] = "nowhere";
    CHECK_THROWS_AS(parse_scenario(doc), ScenarioParseError);
  }
  SUBCASE("wrong type") {
    json doc = json::parse(minimal_text());
    doc["cells"] = 3;
    CHECK_THROWS_AS(parse_scenario(doc), ScenarioParseError);
  }
  SUBCASE("unknown function kind") {
    json doc = json::parse(minimal_text());
    doc["supply"]["kind"] = "cubic";
    CHECK_THROWS_AS(parse_scenario(doc), ScenarioParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_scenario("/nonexistent/none.json"), ScenarioParseError); }
}

TEST_CASE("inflow validation") {
  Scenario sc = parse_scenario_text(minimal_text());
  sc.inflows(1, 0) = 0.3;
  CHECK_FALSE(validate_scenario(sc).ok());
  sc.inflows(1, 0) = 0.0;
  sc.inflows(0, 0) = -0.1;
  CHECK_FALSE(validate_scenario(sc).ok());
}

TEST_CASE("diverge helpers") {
  const Mtn mtn = diverge_junction_scenario().mtn;
  const StateArray x = diverge_state(mtn, {1.0, 2.0, 3.0, 4.0, 5.0});
  CHECK(x(0, 1) == 2.0);
  CHECK(x(2, 0) == 5.0);
  CHECK(x(2, 1) == 0.0);
  CHECK_THROWS(diverge_state(mtn, {1.0, 2.0}));
  const InflowArray l = diverge_inflow(mtn, 0.7, 0.2);
  CHECK(l(0, 0) == 0.7);
  CHECK(l.sum() == doctest::Approx(0.9));
}
