#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mdfn/flows.hpp"
#include "mdfn/network.hpp"
#include "mdfn/simulation.hpp"

namespace mdfn {

/// Malformed scenario: bad JSON syntax, wrong field types, unknown
/// identifiers. The message carries the line or the field path.
class ScenarioParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NamedState {
  std::string name;
  StateArray state;
};

struct Experiment {
  std::string name;
  std::optional<InflowArray> inflows;  // scenario inflows when absent
  std::optional<AllocationRule> rule;
  std::optional<double> t_end;
  std::vector<NamedState> initial_states;
};

struct Scenario {
  Mtn mtn;
  InflowArray inflows;
  AllocationRule rule = AllocationRule::NonFifo;
  IntegratorConfig integrator;
  GridCheck grid;
  std::vector<Experiment> experiments;
};

Scenario parse_scenario(const nlohmann::json& doc);
/// Parses JSON text; syntax errors are reported with their line number.
Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Writes every cell, function and routing entry explicitly, so the result
/// parses back to the same network.
nlohmann::json to_json(const Scenario& scenario);

/// Violations of the inflow array (negative entries, inflow on a
/// non-onramp cell, wrong shape).
ValidationReport validate_inflows(const Mtn& mtn, const InflowArray& lambda);
/// validate_mtn with the scenario's grid settings plus validate_inflows for
/// the scenario and every experiment override.
ValidationReport validate_scenario(const Scenario& scenario);

/// Diverge junction: on-ramp 1 feeds off-ramps 2 and 3; commodity a splits
/// evenly, commodity b goes entirely to 2; d(x) = x, s(x) = 2 - x.
/// Carries experiments at inflows A = (0.5, 0.5), B = (1.2, 0.5) and
/// C = (1.5, 0.5) from two initial states each.
Scenario diverge_junction_scenario();

/// Inflow array for the diverge scenario with lambda_1^(a), lambda_1^(b).
InflowArray diverge_inflow(const Mtn& mtn, double lambda_a, double lambda_b);

/// State for the diverge scenario from the 5-tuple
/// (x_1^a, x_1^b, x_2^a, x_2^b, x_3^a); x_3^b = 0.
StateArray diverge_state(const Mtn& mtn, const std::vector<double>& tuple);

}  // namespace mdfn
