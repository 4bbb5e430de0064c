#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mdfn/flows.hpp"

namespace mdfn {

enum class IntegratorMethod { Rk4, Euler };
std::string_view to_string(IntegratorMethod m);
IntegratorMethod parse_method(std::string_view name);

struct IntegratorConfig {
  IntegratorMethod method = IntegratorMethod::Rk4;
  double dt = 1e-2;
  double t_end = 10.0;
  int record_every = 1;
  double clamp_tolerance = kClampTolerance;

  /// Throws std::invalid_argument on a nonpositive step, horizon or stride.
  void validate() const;
  long num_steps() const;
};

/// A step produced a state with an entry below -clamp_tolerance.
class StepSizeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct BoundaryCrossing {
  double time = 0.0;
  bool leaving = false;  // true: F -> X\F
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateArray> states;
  AllocationRule rule = AllocationRule::NonFifo;
  std::vector<BoundaryCrossing> exit_events;

  const StateArray& final_state() const { return states.back(); }
};

/// One fixed step of the chosen method, followed by clamping of round-off
/// negativity.
StateArray step(const Mtn& mtn, const InflowArray& lambda, AllocationRule rule,
                const StateArray& x, const IntegratorConfig& config);

Trajectory integrate(const Mtn& mtn, const InflowArray& lambda, AllocationRule rule,
                     const StateArray& x0, const IntegratorConfig& config);

struct SearchOptions {
  double rhs_tol = 1e-9;
  double blowup_bound = 1e6;
};

enum class SearchStatus { Converged, HorizonReached, Diverged };
std::string_view to_string(SearchStatus s);

struct EquilibriumSearch {
  SearchStatus status = SearchStatus::HorizonReached;
  StateArray state;
  double time = 0.0;
  double rhs_norm = 0.0;  // l1 norm of the right-hand side at `state`
};

/// Integrates until ||rhs||_1 < rhs_tol, the horizon, or ||x||_1 above the
/// blow-up bound.
EquilibriumSearch find_equilibrium_by_simulation(const Mtn& mtn, const InflowArray& lambda,
                                                 AllocationRule rule, const StateArray& x0,
                                                 const IntegratorConfig& config,
                                                 const SearchOptions& options = {});

/// `t,cell,commodity,density`, one row per recorded (time, cell, commodity).
void write_trajectory_csv(std::ostream& out, const Mtn& mtn, const Trajectory& trajectory);

/// Flattens in (cell, commodity) declaration order.
std::vector<double> flatten(const StateArray& x);

}  // namespace mdfn
