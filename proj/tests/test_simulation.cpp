#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "mdfn/scenario.hpp"
#include "mdfn/simulation.hpp"
#include "support/random_network.hpp"

using namespace mdfn;

namespace {

const Mtn& diverge() {
  static const Mtn mtn = diverge_junction_scenario().mtn;
  return mtn;
}

IntegratorConfig rk4(double dt, double t_end, int record_every = 1) {
  return {IntegratorMethod::Rk4, dt, t_end, record_every, kClampTolerance};
}

}  // namespace

TEST_CASE("equilibrium start stays put under every rule") {
  const StateArray x = diverge_state(diverge(), {0.5, 0.5, 0.25, 0.5, 0.25});
  const InflowArray lambda = diverge_inflow(diverge(), 0.5, 0.5);
  for (auto rule : {AllocationRule::FreeFlowOnly, AllocationRule::Fifo, AllocationRule::NonFifo}) {
    const Trajectory traj = integrate(diverge(), lambda, rule, x, rk4(0.01, 50.0));
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max(worst, (s - x).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-8);
    CHECK(traj.exit_events.empty());
  }
}

TEST_CASE("empty network stays empty") {
  const Trajectory traj = integrate(diverge(), diverge().zero_state(), AllocationRule::NonFifo, diverge().zero_state(),
                                    rk4(0.1, 5.0));
  CHECK(traj.final_state().isZero(0.0));
  CHECK(traj.times.size() == 51);
}

TEST_CASE("RK4 matches the exact free-flow solution") {
  // Cell 1 obeys x' = lambda - x while the network stays free-flow.
  const InflowArray lambda = diverge_inflow(diverge(), 0.5, 0.3);
  StateArray x0 = diverge().zero_state();
  x0(0, 0) = 0.9;
  const Trajectory traj = integrate(diverge(), lambda, AllocationRule::NonFifo, x0, rk4(0.1, 2.0));
  const double exact = 0.5 + 0.4 * std::exp(-2.0);
  CHECK(std::abs(traj.final_state()(0, 0) - exact) < 1e-6);

  IntegratorConfig euler = rk4(0.001, 2.0);
  euler.method = IntegratorMethod::Euler;
  const Trajectory e = integrate(diverge(), lambda, AllocationRule::NonFifo, x0, euler);
  CHECK(std::abs(e.final_state()(0, 0) - exact) < 1e-3);
}

TEST_CASE("free-flow inflow is reached from arbitrary starts") {
  std::mt19937_64 rng(2);
  const InflowArray lambda = diverge_inflow(diverge(), 0.5, 0.5);
  const StateArray x_star = diverge_state(diverge(), {0.5, 0.5, 0.25, 0.5, 0.25});
  for (int trial = 0; trial < 2; ++trial) {
    StateArray x0 = diverge().zero_state();
    for (Index i = 0; i < 3; ++i) x0(i, 0) = testing::uniform(rng, 0.0, 3.0);
    for (Index i = 0; i < 2; ++i) x0(i, 1) = testing::uniform(rng, 0.0, 3.0);
    const Trajectory traj = integrate(diverge(), lambda, AllocationRule::NonFifo, x0, rk4(0.01, 200.0, 100));
    CHECK((traj.final_state() - x_star).lpNorm<1>() < 1e-3);
  }
}

TEST_CASE("boundary crossings are recorded") {
  const InflowArray lambda = diverge_inflow(diverge(), 0.5, 0.5);
  const StateArray congested = diverge_state(diverge(), {3.0, 2.0, 1.5, 0.5, 1.0});
  const Trajectory traj = integrate(diverge(), lambda, AllocationRule::NonFifo, congested, rk4(0.01, 50.0, 10));
  REQUIRE_FALSE(traj.exit_events.empty());
  CHECK_FALSE(traj.exit_events.front().leaving);
}

TEST_CASE("equilibrium search") {
  const auto b = find_equilibrium_by_simulation(diverge(), diverge_inflow(diverge(), 1.2, 0.5), AllocationRule::NonFifo,
                                                diverge_state(diverge(), {2.0, 0.1, 0.0, 1.0, 0.3}), rk4(0.01, 300.0));
  CHECK(b.status == SearchStatus::Converged);
  CHECK((b.state - diverge_state(diverge(), {1.4, 0.7, 0.5, 0.5, 0.7})).lpNorm<1>() < 1e-3);

  const auto zero = find_equilibrium_by_simulation(diverge(), diverge().zero_state(), AllocationRule::NonFifo,
                                                   diverge().zero_state(), rk4(0.01, 10.0));
  CHECK(zero.status == SearchStatus::Converged);
  CHECK(zero.time == 0.0);
}

TEST_CASE("integrator configuration is validated") {
  CHECK_THROWS_AS(rk4(0.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rk4(0.1, -1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(rk4(0.1, 1.0, 0).validate(), std::invalid_argument);
  CHECK(rk4(0.1, 1.0).num_steps() == 10);
  CHECK(parse_method("euler") == IntegratorMethod::Euler);
  CHECK(parse_method("RK4") == IntegratorMethod::Rk4);
}

TEST_CASE("oversized Euler steps are refused rather than clamped") {
  IntegratorConfig cfg = rk4(3.0, 3.0);
  cfg.method = IntegratorMethod::Euler;
  const StateArray x0 = diverge_state(diverge(), {1.0, 1.0, 1.0, 1.0, 1.0});
  CHECK_THROWS_AS(step(diverge(), diverge().zero_state(), AllocationRule::NonFifo, x0, cfg), StepSizeError);
}

TEST_CASE("trajectory CSV") {
  const Trajectory traj = integrate(diverge(), diverge_inflow(diverge(), 0.5, 0.5), AllocationRule::NonFifo,
                                    diverge().zero_state(), rk4(0.25, 0.5));
  std::ostringstream out;
  write_trajectory_csv(out, diverge(), traj);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,cell,commodity,density");
  std::getline(in, line);
  CHECK(line == "0,1,a,0");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3 * 6);
}

TEST_CASE("property: trajectories stay nonnegative on random networks") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = testing::random_case(rng);
    StateArray x0 = c.mtn.zero_state();
    for (Index i = 0; i < x0.rows(); ++i)
      for (Index k = 0; k < x0.cols(); ++k) x0(i, k) = testing::uniform(rng, 0.0, 4.0) * (testing::uniform(rng, 0, 1) < 0.3);
    const InflowArray heavy = 1.5 * c.critical_scale * c.direction;
    for (auto rule : {AllocationRule::Fifo, AllocationRule::NonFifo}) {
      const Trajectory traj = integrate(c.mtn, heavy, rule, x0, rk4(0.02, 20.0, 10));
      for (const auto& s : traj.states) CHECK(s.minCoeff() >= 0.0);
    }
  }
}
