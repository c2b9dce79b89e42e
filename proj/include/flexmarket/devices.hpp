#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "flexmarket/error.hpp"

namespace flexmarket {

// Sign convention: P > 0 injects into the grid, P < 0 consumes.

struct BatteryParams {
  std::string id;
  double self_discharge = 0.0;  // per-step fraction
  double efficiency = 1.0;
  double capacity_kwh = 0.0;
  double p_min = 0.0;  // < 0, charging limit
  double p_max = 0.0;  // > 0, discharging limit
  double soc_min = 0.0;
  double soc_max = 1.0;
  double soc_init = 0.5;

  bool operator==(const BatteryParams&) const = default;
};

struct EvParams {
  BatteryParams battery;
  int away_start = 0;  // inclusive step range in which the vehicle is gone
  int away_end = -1;
  double soc_target = 0.0;
  int target_step = 0;

  /// Away test for absolute step t; with period > 0 the window repeats every period steps.
  bool away(int t, int period = 0) const;

  bool operator==(const EvParams&) const = default;
};

struct HpParams {
  std::string id;
  double r_th = 0.0;
  double c_th = 0.0;
  double cop = 0.0;
  double p_rated = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double t_setpoint = 0.0;
  double t_init = 0.0;

  double theta(double dt_h) const;
  double rho() const { return r_th * cop; }

  bool operator==(const HpParams&) const = default;
};

struct PvParams {
  std::string id;
  double p_rated = 0.0;

  bool operator==(const PvParams&) const = default;
};

using Device = std::variant<BatteryParams, EvParams, HpParams, PvParams>;

enum class DeviceKind { kBattery, kEv, kHeatPump, kPv };

const char* to_string(DeviceKind kind);
DeviceKind device_kind(const Device& device);
const std::string& device_id(const Device& device);

/// SOC for batteries and EVs, indoor temperature for heat pumps, unused for PV.
struct DeviceState {
  DeviceKind kind = DeviceKind::kPv;
  double value = 0.0;

  bool operator==(const DeviceState&) const = default;
};

DeviceState initial_state(const Device& device);

/// Field-level diagnostics for one device; `prefix` is prepended to field names.
std::vector<Diagnostic> validate_device(const Device& device, const std::string& prefix, int total_steps);

/// (1 − δ)·soc − power·dt·η / capacity. No clamping.
double battery_soc_step(const BatteryParams& p, double soc, double power_kw, double dt_h);
double battery_soc_step(const EvParams& p, double soc, double power_kw, double dt_h);

enum class HpMode { kCooling, kHeating };

const char* to_string(HpMode mode);

/// Cooling when t_out ≥ reference, heating otherwise.
HpMode hp_mode(double t_out, double reference);

/// Mode picked from t_out against t_in. Throws kPrecondition for power > 0.
double hp_temperature_step(const HpParams& p, double t_in, double t_out, double power_kw, double dt_h);
/// Same dynamics with the mode given explicitly.
double hp_temperature_step(const HpParams& p, double t_in, double t_out, double power_kw, double dt_h, HpMode mode);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool empty() const { return lo > hi; }
  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Device power limits at absolute step t. `period` > 0 makes the EV away window daily.
Interval feasible_power_interval(const Device& device, int t, double alpha_pv, int period = 0);

struct ObjectiveWeights {
  double alpha_cyc = 0.1;
  double xi_ev = 10.0;
  double xi_ac = 1.0;
  double xi_pv = 1.0;
  double utilization = 1.0;

  bool operator==(const ObjectiveWeights&) const = default;
};

struct HorizonView;

/// Device cost over one horizon. `schedule` has one power per step; `states`
/// has one more entry (state before each step plus the final state) for BS, EV
/// and HP and is ignored for PV. Initial states are constants and excluded from
/// the comfort and tracking sums. Throws kDimension on length mismatch.
double der_objective(const Device& device, std::span<const double> schedule, std::span<const double> states,
                     const ObjectiveWeights& weights, const HorizonView& horizon);

/// weight·Σ_t (PV + BS + EV)², each argument the per-step total of that class.
double utilization_objective(std::span<const double> pv, std::span<const double> bs, std::span<const double> ev,
                             double weight);

}  // namespace flexmarket
