#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "mdfn/analysis.hpp"
#include "mdfn/scenario.hpp"
#include "support/random_network.hpp"

using namespace mdfn;

namespace {

const Mtn& diverge() {
  static const Mtn mtn = diverge_junction_scenario().mtn;
  return mtn;
}

// Diverge topology with saturating demands below a constant supply.
Mtn saturating_diverge(double vmax, double supply_intercept, double supply_slope) {
  Mtn mtn = diverge_junction_scenario().mtn;
  for (auto& c : mtn.commodities)
    for (auto& d : c.demands) d = DemandFunction::saturating(vmax, 1.0);
  for (Index i = 1; i < 3; ++i) mtn.supplies[static_cast<std::size_t>(i)] = SupplyFunction::affine(supply_intercept, supply_slope);
  return mtn;
}

// Central differences of the free-flow right-hand side in commodity k,
// forward differences on empty entries.
Eigen::MatrixXd fd_block(const Mtn& mtn, const StateArray& x, const InflowArray& lambda, Index k) {
  const double h = 1e-6;
  const Index n = mtn.num_cells();
  Eigen::MatrixXd j(n, n);
  for (Index c = 0; c < n; ++c) {
    StateArray up = x;
    StateArray down = x;
    const double back = x(c, k) >= h ? h : 0.0;
    up(c, k) += h;
    down(c, k) -= back;
    j.col(c) = (rhs(mtn, up, lambda, AllocationRule::NonFifo).col(k) -
                rhs(mtn, down, lambda, AllocationRule::NonFifo).col(k)) / (h + back);
  }
  return j;
}

// Smallest l1 distance to x* among uniformly sampled congested states of a box.
double rejection_oracle(const Mtn& mtn, const StateArray& x_star, double half_width, long samples,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (long s = 0; s < samples; ++s) {
    StateArray y = x_star;
    for (Index i = 0; i < y.rows(); ++i)
      for (Index k = 0; k < y.cols(); ++k)
        y(i, k) = std::max(0.0, x_star(i, k) + testing::uniform(rng, -half_width, half_width));
    if (!is_free_flow(mtn, y)) best = std::min(best, (y - x_star).lpNorm<1>());
  }
  return best;
}

}  // namespace

TEST_CASE("capacity region is strict") {
  CHECK(capacity_contains(diverge(), 1, Eigen::Vector2d(0.4, 0.5)));
  CHECK(capacity_contains(diverge(), 1, Eigen::Vector2d(0.0, 0.0)));
  const auto edge = capacity_check(diverge(), 1, Eigen::Vector2d(0.5, 0.5));
  CHECK(edge.status == Membership::Boundary);
  CHECK_FALSE(edge.inside());
  CHECK(capacity_check(diverge(), 1, Eigen::Vector2d(0.6, 0.5)).status == Membership::Outside);
}

TEST_CASE("capacity region reports demand range failures") {
  const Mtn mtn = saturating_diverge(1.0, 5.0, 0.0);
  const auto c = capacity_check(mtn, 1, Eigen::Vector2d(1.5, 0.1));
  CHECK(c.out_of_range);
  CHECK(c.status == Membership::Outside);
}

TEST_CASE("single-commodity capacity matches a one-dimensional sweep") {
  Mtn mtn;
  mtn.topology = NetworkTopology({{"1", "w", "v"}, {"2", "v", "w"}}, "w");
  CommoditySpec c{"a", Eigen::MatrixXd::Zero(2, 2),
                  {DemandFunction::saturating(2.0, 1.0), DemandFunction::saturating(2.0, 1.0)}};
  c.routing(0, 1) = 1.0;
  mtn.commodities.push_back(c);
  mtn.supplies = {std::nullopt, SupplyFunction::affine(3.0, 0.8)};
  // c_2 = sup{d(xi) : d(xi) < s(xi)} on a fine grid.
  double cap = 0.0;
  for (int p = 0; p <= 400000; ++p) {
    const double xi = 1e-5 * p;
    const double d = mtn.demand(1, 0)(xi);
    if (d < mtn.supply(1)(xi)) cap = std::max(cap, d);
  }
  for (double zeta = 0.0; zeta < 2.0; zeta += 0.01) {
    if (std::abs(zeta - cap) < 1e-4) continue;
    CHECK(capacity_contains(mtn, 1, Eigen::VectorXd::Constant(1, zeta)) == (zeta < cap));
  }
}

TEST_CASE("transported inflow and stability region on the diverge network") {
  const auto zeta = transported_inflow(diverge(), diverge_inflow(diverge(), 0.8, 0.3));
  CHECK(zeta(0, 0) == doctest::Approx(0.8));
  CHECK(zeta(1, 0) == doctest::Approx(0.4));
  CHECK(zeta(2, 0) == doctest::Approx(0.4));
  CHECK(zeta(1, 1) == doctest::Approx(0.3));
  CHECK(zeta(2, 1) == 0.0);

  CHECK(stability_region_contains(diverge(), diverge_inflow(diverge(), 0.5, 0.5)).inside);
  CHECK(stability_region_contains(diverge(), diverge().zero_state()).inside);
  const auto b = stability_region_contains(diverge(), diverge_inflow(diverge(), 1.2, 0.5));
  CHECK_FALSE(b.inside);
  REQUIRE(b.failing_cells.size() == 1);
  CHECK(b.failing_cells[0] == 1);
  const auto edge = stability_region_contains(diverge(), diverge_inflow(diverge(), 1.0, 0.5));
  CHECK_FALSE(edge.inside);
  CHECK(edge.on_boundary);
}

TEST_CASE("bounded region on the diverge network") {
  CHECK(throughput_capacity(diverge(), 1) == doctest::Approx(1.0));
  CHECK(bounded_region_membership(diverge(), diverge_inflow(diverge(), 1.2, 0.5)) == Membership::Inside);
  CHECK(bounded_region_membership(diverge(), diverge_inflow(diverge(), 1.5, 0.5)) == Membership::Boundary);
  CHECK(bounded_region_membership(diverge(), diverge_inflow(diverge(), 1.8, 0.5)) == Membership::Outside);
}

TEST_CASE("free-flow equilibrium of the diverge network") {
  const auto eq = free_flow_equilibrium(diverge(), diverge_inflow(diverge(), 0.5, 0.5));
  CHECK(eq.in_free_flow);
  const std::vector<double> expected{0.5, 0.5, 0.25, 0.5, 0.25, 0.0};
  const auto got = flatten(eq.x_star);
  for (std::size_t e = 0; e < expected.size(); ++e) CHECK(std::abs(got[e] - expected[e]) <= 1e-12);

  const auto zero = free_flow_equilibrium(diverge(), diverge().zero_state());
  CHECK(zero.in_free_flow);
  CHECK(zero.x_star.isZero(0.0));

  const auto b = free_flow_equilibrium(diverge(), diverge_inflow(diverge(), 1.2, 0.5));
  CHECK_FALSE(b.in_free_flow);
  CHECK(b.per_cell_slack(1) <= 0.0);
}

TEST_CASE("inflow beyond the demand range names the cell and commodity") {
  const Mtn mtn = saturating_diverge(1.0, 5.0, 0.0);
  try {
    free_flow_equilibrium(mtn, diverge_inflow(mtn, 0.5, 1.5));
    FAIL("expected CapacityExceededError");
  } catch (const CapacityExceededError& e) {
    CHECK(e.commodity() == "b");
    CHECK((e.cell() == "1" || e.cell() == "2"));
  }
}

TEST_CASE("free-flow Jacobian of the diverge network") {
  const StateArray x = diverge_state(diverge(), {0.5, 0.5, 0.25, 0.5, 0.25});
  const Eigen::MatrixXd j = jacobian_free_flow(diverge(), x, 0);
  Eigen::Matrix3d expected;
  expected << -1.0, 0.0, 0.0, 0.5, -1.0, 0.0, 0.5, 0.0, -1.0;
  CHECK((j - expected).norm() < 1e-14);
  const auto h = hurwitz_check(j);
  CHECK(h.is_hurwitz);
  CHECK(h.max_real_part == doctest::Approx(-1.0));
  CHECK(l1_matrix_measure(j) == 0.0);
  CHECK_THROWS_AS(jacobian_free_flow(diverge(), diverge_state(diverge(), {2.0, 1.0, 0.5, 0.5, 0.0}), 0),
                  RuleDomainError);
}

TEST_CASE("property: Jacobians match finite differences at random free-flow states") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = testing::random_case(rng);
    const auto eq = free_flow_equilibrium(c.mtn, c.lambda);
    REQUIRE(eq.in_free_flow);
    const StateArray x = eq.x_star;
    for (Index k = 0; k < c.mtn.num_commodities(); ++k) {
      const Eigen::MatrixXd j = jacobian_free_flow(c.mtn, x, k);
      CHECK((j - fd_block(c.mtn, x, c.lambda, k)).cwiseAbs().maxCoeff() < 1e-4);
      CHECK(hurwitz_check(j).is_hurwitz);
      CHECK(l1_matrix_measure(j) <= 1e-12);
    }
  }
}

TEST_CASE("delta bar on the diverge network") {
  const StateArray x = diverge_state(diverge(), {0.5, 0.5, 0.25, 0.5, 0.25});
  const DeltaBar db = delta_bar(diverge(), x);
  CHECK(db.method == DeltaBarMethod::AffineClosedForm);
  CHECK(db.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rejection_oracle(diverge(), x, 1.0, 100000, 3) >= db.value - 1e-9);
  CHECK_THROWS_AS(delta_bar(diverge(), diverge_state(diverge(), {1.0, 0.5, 0.5, 0.5, 0.0})), RuleDomainError);
}

TEST_CASE("delta bar is infinite when supply dominates every demand") {
  const Mtn mtn = saturating_diverge(0.5, 2.0, 0.0);
  const auto eq = free_flow_equilibrium(mtn, diverge_inflow(mtn, 0.2, 0.2));
  REQUIRE(eq.in_free_flow);
  CHECK(std::isinf(delta_bar(mtn, eq.x_star).value));
}

TEST_CASE("general delta bar is a lower bound on the sampled distance") {
  const Mtn mtn = saturating_diverge(2.0, 2.0, 0.5);
  const auto eq = free_flow_equilibrium(mtn, diverge_inflow(mtn, 0.4, 0.3));
  REQUIRE(eq.in_free_flow);
  const DeltaBar db = delta_bar(mtn, eq.x_star);
  CHECK(db.method == DeltaBarMethod::SampledLowerBound);
  CHECK(db.value > 0.0);
  CHECK(db.value <= db.sampled_upper);
  CHECK(rejection_oracle(mtn, eq.x_star, 3.0, 100000, 9) >= db.value - 1e-9);
}

TEST_CASE("nonexpansiveness probe") {
  const InflowArray lambda = diverge_inflow(diverge(), 0.5, 0.5);
  const StateArray x = diverge_state(diverge(), {0.5, 0.5, 0.25, 0.5, 0.25});
  const IntegratorConfig cfg{IntegratorMethod::Rk4, 0.01, 50.0, 1, kClampTolerance};
  const auto same = nonexpansiveness_probe(diverge(), lambda, AllocationRule::NonFifo, x, x, cfg);
  CHECK(same.max_growth == 0.0);
  CHECK(same.final_distance == 0.0);
  CHECK_FALSE(same.exit_time.has_value());

  std::mt19937_64 rng(23);
  for (int p = 0; p < 100; ++p) {
    const StateArray a = testing::random_state_near(x, 0.25, rng);
    const StateArray b = testing::random_state_near(x, 0.25, rng);
    const auto r = nonexpansiveness_probe(diverge(), lambda, AllocationRule::NonFifo, a, b, cfg);
    CHECK(r.max_step_increase <= 1e-8);
    CHECK_FALSE(r.exit_time.has_value());
  }

  const StateArray congested = diverge_state(diverge(), {3.0, 2.0, 1.5, 0.5, 1.0});
  const auto out = nonexpansiveness_probe(diverge(), lambda, AllocationRule::NonFifo, congested, x, cfg);
  CHECK(out.started_outside);

  // Starts in F with cell 1 nearly saturating cell 2, then cell 2 fills up.
  const StateArray edge = diverge_state(diverge(), {0.0, 1.9, 0.0, 0.0, 0.0});
  REQUIRE(is_free_flow(diverge(), edge));
  const auto cut = nonexpansiveness_probe(diverge(), lambda, AllocationRule::NonFifo, edge, x, cfg);
  CHECK_FALSE(cut.started_outside);
  REQUIRE(cut.exit_time.has_value());
  CHECK(*cut.exit_time < 1.0);
  CHECK(cut.certified_until < *cut.exit_time);
}
