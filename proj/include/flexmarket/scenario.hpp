#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "flexmarket/devices.hpp"

namespace flexmarket {

struct TimeGrid {
  double dt_hours = 1.0;
  int total_steps = 24;
  int horizon_len = 24;
  /// Repeat the last day of every series to cover the lookahead past the end.
  bool pad_cyclic = false;

  int steps_per_day() const;
  bool operator==(const TimeGrid&) const = default;
};

struct ExogenousSeries {
  std::vector<double> outdoor_temp;
  std::vector<double> irradiance_frac;
  std::vector<double> lem_price;

  bool operator==(const ExogenousSeries&) const = default;
};

struct CmaSpec {
  std::string id;
  double gamma = 1.0;
  std::vector<Device> devices;
  std::vector<double> fixed_load;  // kW consumed, stored as a nonnegative magnitude
  double eps_lo = 0.01;
  double eps_hi = 0.5;

  bool operator==(const CmaSpec&) const = default;
};

struct SetpointPolicy {
  std::vector<double> beta;  // one per clearing step
  bool clip_to_positivity = true;
  /// Also keep the request below the level at which some agent would saturate.
  bool clip_to_no_saturation = true;

  bool operator==(const SetpointPolicy&) const = default;
};

struct SolverConfig {
  double tol = 1e-6;
  int max_iter = 20000;
  int node_limit = 20;
  int local_search_passes = 10;
  double gap_tol = 1e-6;

  bool operator==(const SolverConfig&) const = default;
};

struct Scenario {
  std::string name;
  TimeGrid time;
  std::string temperature_unit = "F";
  ObjectiveWeights weights;
  SetpointPolicy policy;
  SolverConfig solver;
  ExogenousSeries series;
  std::vector<CmaSpec> agents;

  bool operator==(const Scenario&) const = default;
};

/// Throws kValidation listing every violated invariant by field path.
void validate_scenario(const Scenario& s);

/// Reads the JSON document without interpreting it. Throws kFileMissing / kParse.
nlohmann::json read_scenario_document(const std::filesystem::path& path);

/// Builds and validates a Scenario; series given as file names resolve against `base_dir`.
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);

Scenario load_scenario(const std::filesystem::path& path);

/// Serializes with every series inline; parse_scenario(scenario_to_json(s)) == s.
nlohmann::json scenario_to_json(const Scenario& s);

/// CSV with a header row and columns (step, value). Throws kFileMissing / kParse.
std::vector<double> read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const std::vector<double>& values);

/// Sets a dotted path (e.g. "weights.xi_ev", "agents.0.gamma") to a JSON-parsed
/// value, or to the raw string if it does not parse. Throws kValidation for unknown paths.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Exogenous data and initial states for the window [t_start, t_start + H − 1].
struct HorizonView {
  int t_start = 0;
  int length = 0;
  double dt_hours = 1.0;
  int total_steps = 0;
  int steps_per_day = 24;
  std::vector<double> outdoor_temp;
  std::vector<double> irradiance_frac;
  std::vector<double> lem_price;
  std::vector<std::vector<double>> fixed_load;    // per agent
  std::vector<std::vector<DeviceState>> states;  // per agent, per device

  int step(int k) const { return t_start + k; }
};

std::vector<std::vector<DeviceState>> initial_states(const Scenario& s);

/// Throws kOutOfRange when the window leaves the (padded) series.
HorizonView slice_horizon(const Scenario& s, int t_start);
HorizonView slice_horizon(const Scenario& s, int t_start, std::vector<std::vector<DeviceState>> states);

}  // namespace flexmarket
