#include "mdfn/simulation.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "mdfn/log.hpp"

namespace mdfn {

std::string_view to_string(IntegratorMethod m) {
  return m == IntegratorMethod::Rk4 ? "rk4" : "euler";
}

IntegratorMethod parse_method(std::string_view name) {
  std::string lower;
  for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (lower == "rk4" || lower == "rk4fixed") return IntegratorMethod::Rk4;
  if (lower == "euler") return IntegratorMethod::Euler;
  throw std::invalid_argument("unknown integrator method '" + std::string(name) + "'");
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("integrator: dt must be > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw std::invalid_argument("integrator: t_end must be > 0");
  if (dt > t_end) throw std::invalid_argument("integrator: dt must not exceed t_end");
  if (record_every < 1) throw std::invalid_argument("integrator: record_every must be >= 1");
  if (!(clamp_tolerance >= 0.0)) throw std::invalid_argument("integrator: clamp_tolerance must be >= 0");
}

long IntegratorConfig::num_steps() const { return std::lround(t_end / dt); }

std::string_view to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::Converged:
      return "converged";
    case SearchStatus::HorizonReached:
      return "horizon";
    case SearchStatus::Diverged:
      return "diverged";
  }
  return "?";
}

namespace {

// Stage states are kept in X so the rules are never evaluated off the orthant.
Eigen::MatrixXd stage(const Mtn& mtn, const InflowArray& lambda, AllocationRule rule,
                      const StateArray& x) {
  return rhs(mtn, x.cwiseMax(0.0), lambda, rule);
}

}  // namespace

StateArray step(const Mtn& mtn, const InflowArray& lambda, AllocationRule rule,
                const StateArray& x, const IntegratorConfig& config) {
  const double h = config.dt;
  StateArray next;
  if (config.method == IntegratorMethod::Euler) {
    next = x + h * stage(mtn, lambda, rule, x);
  } else {
    const Eigen::MatrixXd k1 = stage(mtn, lambda, rule, x);
    const Eigen::MatrixXd k2 = stage(mtn, lambda, rule, x + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = stage(mtn, lambda, rule, x + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = stage(mtn, lambda, rule, x + h * k3);
    next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  const double lowest = next.size() ? next.minCoeff() : 0.0;
  if (lowest < -config.clamp_tolerance) {
    std::ostringstream msg;
    msg << "integration step produced density " << lowest << " < -" << config.clamp_tolerance
        << "; reduce dt (currently " << h << ")";
    throw StepSizeError(msg.str());
  }
  return next.cwiseMax(0.0);
}

Trajectory integrate(const Mtn& mtn, const InflowArray& lambda, AllocationRule rule,
                     const StateArray& x0, const IntegratorConfig& config) {
  config.validate();
  Trajectory traj;
  traj.rule = rule;
  StateArray x = project_state(x0);
  const long steps = config.num_steps();
  traj.times.reserve(static_cast<std::size_t>(steps / config.record_every + 2));
  traj.states.reserve(traj.times.capacity());
  traj.times.push_back(0.0);
  traj.states.push_back(x);

  bool free = is_free_flow(mtn, x);
  for (long n = 1; n <= steps; ++n) {
    x = step(mtn, lambda, rule, x, config);
    const double t = static_cast<double>(n) * config.dt;
    const bool now_free = is_free_flow(mtn, x);
    if (now_free != free) {
      traj.exit_events.push_back({t, free});
      free = now_free;
    }
    if (n % config.record_every == 0 || n == steps) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  logger()->debug("integrated {} steps (dt={}, rule={}), {} boundary crossings", steps, config.dt,
                  to_string(rule), traj.exit_events.size());
  return traj;
}

EquilibriumSearch find_equilibrium_by_simulation(const Mtn& mtn, const InflowArray& lambda,
                                                 AllocationRule rule, const StateArray& x0,
                                                 const IntegratorConfig& config,
                                                 const SearchOptions& options) {
  config.validate();
  EquilibriumSearch result;
  StateArray x = project_state(x0);
  const long steps = config.num_steps();
  for (long n = 0;; ++n) {
    const double norm = rhs(mtn, x, lambda, rule).lpNorm<1>();
    result.state = x;
    result.time = static_cast<double>(n) * config.dt;
    result.rhs_norm = norm;
    if (norm < options.rhs_tol) {
      result.status = SearchStatus::Converged;
      break;
    }
    if (x.lpNorm<1>() > options.blowup_bound) {
      result.status = SearchStatus::Diverged;
      break;
    }
    if (n == steps) {
      result.status = SearchStatus::HorizonReached;
      break;
    }
    x = step(mtn, lambda, rule, x, config);
  }
  logger()->debug("equilibrium search: {} at t={} (|rhs|_1={})", to_string(result.status),
                  result.time, result.rhs_norm);
  return result;
}

void write_trajectory_csv(std::ostream& out, const Mtn& mtn, const Trajectory& trajectory) {
  out << "t,cell,commodity,density\n";
  char time_buf[64];
  char value_buf[64];
  for (std::size_t s = 0; s < trajectory.times.size(); ++s) {
    std::snprintf(time_buf, sizeof time_buf, "%.12g", trajectory.times[s]);
    const StateArray& x = trajectory.states[s];
    for (Index i = 0; i < mtn.num_cells(); ++i) {
      for (Index k = 0; k < mtn.num_commodities(); ++k) {
        std::snprintf(value_buf, sizeof value_buf, "%.15g", x(i, k));
        out << time_buf << ',' << mtn.topology.cell_id(i) << ','
            << mtn.commodities[static_cast<std::size_t>(k)].id << ',' << value_buf << '\n';
      }
    }
  }
}

std::vector<double> flatten(const StateArray& x) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < x.cols(); ++k) out.push_back(x(i, k));
  return out;
}

}  // namespace mdfn
