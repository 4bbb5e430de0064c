#include "doctest.h"

#include <algorithm>
#include <random>

#include "mdfn/scenario.hpp"
#include "support/random_network.hpp"

using namespace mdfn;

namespace {

bool has_tag(const ValidationReport& r, const std::string& tag) {
  return std::any_of(r.violations.begin(), r.violations.end(), [&](const Violation& v) { return v.tag == tag; });
}

Mtn two_cell_cycle() {
  Mtn mtn;
  mtn.topology = NetworkTopology({{"in", "w", "u"}, {"c1", "u", "v"}, {"c2", "v", "u"}, {"out", "z", "w"}}, "w");
  CommoditySpec c{"a", Eigen::MatrixXd::Zero(4, 4), std::vector<DemandFunction>(4, DemandFunction::linear(1.0))};
  c.routing(0, 1) = 1.0;
  c.routing(1, 2) = 1.0;
  c.routing(2, 1) = 1.0;
  mtn.commodities.push_back(c);
  mtn.supplies = {std::nullopt, SupplyFunction::affine(1.0, 0.0), SupplyFunction::affine(1.0, 0.0),
                  SupplyFunction::affine(1.0, 0.0)};
  return mtn;
}

}  // namespace

TEST_CASE("diverge network is valid and its roles are derived from tail and head") {
  const Mtn mtn = diverge_junction_scenario().mtn;
  const auto report = validate_mtn(mtn);
  CHECK_MESSAGE(report.ok(), report.to_string());
  const auto& t = mtn.topology;
  CHECK(t.is_onramp(0));
  CHECK(t.is_offramp(1));
  CHECK(t.is_offramp(2));
  CHECK(t.adjacent(0, 1));
  CHECK(t.adjacent(0, 2));
  CHECK_FALSE(t.adjacent(1, 0));
  CHECK_FALSE(t.adjacent(1, 2));
  CHECK(t.adjacency().size() == 2);
  CHECK(t.find_cell("3") == Index{2});
  CHECK_FALSE(t.find_cell("4").has_value());
}

TEST_CASE("single off-ramp cell with an empty routing row is valid") {
  Mtn mtn;
  mtn.topology = NetworkTopology({{"only", "v", "w"}}, "w");
  mtn.commodities.push_back({"a", Eigen::MatrixXd::Zero(1, 1), {DemandFunction::linear(1.0)}});
  mtn.supplies = {SupplyFunction::affine(1.0, 0.5)};
  CHECK(validate_mtn(mtn).ok());
}

TEST_CASE("routing violations are reported with their assumption tag") {
  Mtn base = diverge_junction_scenario().mtn;

  SUBCASE("row sum below one on a non-sink") {
    base.commodities[0].routing(0, 1) = 0.4;
    CHECK(has_tag(validate_mtn(base), "eq. (4)"));
  }
  SUBCASE("routing out of an off-ramp") {
    base.commodities[1].routing(1, 2) = 0.5;
    const auto r = validate_mtn(base);
    CHECK(has_tag(r, "eq. (3)"));
    CHECK(has_tag(r, "eq. (4)"));
  }
  SUBCASE("negative entry") {
    base.commodities[0].routing(0, 1) = -0.5;
    base.commodities[0].routing(0, 2) = 1.5;
    CHECK(has_tag(validate_mtn(base), "eq. (3)"));
  }
  SUBCASE("bad demand and supply") {
    base.commodities[0].demands[1] = DemandFunction::linear(0.0);
    base.supplies[2] = SupplyFunction::affine(0.0, 0.0);
    const auto r = validate_mtn(base);
    CHECK(has_tag(r, "eq. (1)"));
    CHECK(has_tag(r, "eq. (2)"));
  }
  SUBCASE("missing supply") {
    base.supplies[1] = std::nullopt;
    CHECK(has_tag(validate_mtn(base), "eq. (1)"));
  }
  SUBCASE("wrong dimensions are reported, not thrown") {
    base.commodities[0].routing = Eigen::MatrixXd::Zero(2, 2);
    const auto r = validate_mtn(base);
    CHECK(has_tag(r, "structure"));
  }
}

TEST_CASE("cycle without an exit fails out-connectivity") {
  const Mtn mtn = two_cell_cycle();
  const auto r = validate_mtn(mtn);
  CHECK(has_tag(r, "eq. (5)"));
  const auto reach = path_to_sink_exists(mtn.routing(0), mtn.topology);
  CHECK_FALSE(reach[1]);
  CHECK_FALSE(reach[2]);
  CHECK(reach[3]);
}

TEST_CASE("path to sink on the diverge network") {
  const Mtn mtn = diverge_junction_scenario().mtn;
  for (Index k = 0; k < 2; ++k) {
    const auto reach = path_to_sink_exists(mtn.routing(k), mtn.topology);
    CHECK(std::all_of(reach.begin(), reach.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("property: generated networks are valid with contracting routing") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const Mtn mtn = testing::random_mtn(rng);
    const auto r = validate_mtn(mtn);
    REQUIRE_MESSAGE(r.ok(), r.to_string());
    CHECK(mtn.num_cells() <= 8);
    CHECK(mtn.num_commodities() <= 3);
    for (Index k = 0; k < mtn.num_commodities(); ++k) CHECK(spectral_radius(mtn.routing(k)) < 1.0 - 1e-8);
  }
}
