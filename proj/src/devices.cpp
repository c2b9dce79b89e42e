#include "flexmarket/devices.hpp"

#include <cmath>

#include "flexmarket/scenario.hpp"

namespace flexmarket {

bool EvParams::away(int t, int period) const {
  const int s = period > 0 ? ((t % period) + period) % period : t;
  return s >= away_start && s <= away_end;
}

double HpParams::theta(double dt_h) const { return std::exp(-dt_h / (r_th * c_th)); }

const char* to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::kBattery: return "battery";
    case DeviceKind::kEv: return "ev";
    case DeviceKind::kHeatPump: return "heat_pump";
    case DeviceKind::kPv: return "pv";
  }
  return "unknown";
}

DeviceKind device_kind(const Device& device) { return static_cast<DeviceKind>(device.index()); }

const std::string& device_id(const Device& device) {
  struct {
    const std::string& operator()(const BatteryParams& p) const { return p.id; }
    const std::string& operator()(const EvParams& p) const { return p.battery.id; }
    const std::string& operator()(const HpParams& p) const { return p.id; }
    const std::string& operator()(const PvParams& p) const { return p.id; }
  } visitor;
  return std::visit(visitor, device);
}

DeviceState initial_state(const Device& device) {
  switch (device_kind(device)) {
    case DeviceKind::kBattery: return {DeviceKind::kBattery, std::get<BatteryParams>(device).soc_init};
    case DeviceKind::kEv: return {DeviceKind::kEv, std::get<EvParams>(device).battery.soc_init};
    case DeviceKind::kHeatPump: return {DeviceKind::kHeatPump, std::get<HpParams>(device).t_init};
    case DeviceKind::kPv: return {DeviceKind::kPv, 0.0};
  }
  return {};
}

namespace {

void check(std::vector<Diagnostic>& out, bool ok, const std::string& field, const std::string& message) {
  if (!ok) out.push_back({field, message});
}

void validate_battery(const BatteryParams& p, const std::string& prefix, std::vector<Diagnostic>& out) {
  check(out, p.self_discharge >= 0.0 && p.self_discharge < 1.0, prefix + "self_discharge", "must lie in [0, 1)");
  check(out, p.efficiency > 0.0 && p.efficiency <= 1.0, prefix + "efficiency", "must lie in (0, 1]");
  check(out, p.capacity_kwh > 0.0, prefix + "capacity_kwh", "must be positive");
  check(out, p.p_min < 0.0, prefix + "p_min", "must be negative");
  check(out, p.p_max > 0.0, prefix + "p_max", "must be positive");
  check(out, p.soc_min >= 0.0 && p.soc_max <= 1.0 && p.soc_min < p.soc_max, prefix + "soc_min",
        "require 0 <= soc_min < soc_max <= 1");
  check(out, p.soc_init >= p.soc_min && p.soc_init <= p.soc_max, prefix + "soc_init",
        "must lie within [soc_min, soc_max]");
}

}  // namespace

std::vector<Diagnostic> validate_device(const Device& device, const std::string& prefix, int total_steps) {
  std::vector<Diagnostic> out;
  switch (device_kind(device)) {
    case DeviceKind::kBattery: validate_battery(std::get<BatteryParams>(device), prefix, out); break;
    case DeviceKind::kEv: {
      const auto& p = std::get<EvParams>(device);
      validate_battery(p.battery, prefix, out);
      check(out, p.away_start <= p.away_end, prefix + "away_window", "start must not exceed end");
      check(out, p.target_step >= 0 && p.target_step < total_steps, prefix + "target_step",
            "must lie within the simulation");
      check(out, p.soc_target >= p.battery.soc_min && p.soc_target <= p.battery.soc_max, prefix + "soc_target",
            "must lie within [soc_min, soc_max]");
      break;
    }
    case DeviceKind::kHeatPump: {
      const auto& p = std::get<HpParams>(device);
      check(out, p.r_th > 0.0, prefix + "r_th", "must be positive");
      check(out, p.c_th > 0.0, prefix + "c_th", "must be positive");
      check(out, p.cop > 0.0, prefix + "cop", "must be positive");
      check(out, p.p_rated > 0.0, prefix + "p_rated", "must be positive");
      check(out, p.t_min < p.t_setpoint && p.t_setpoint < p.t_max, prefix + "t_setpoint",
            "require t_min < t_setpoint < t_max");
      check(out, p.t_init >= p.t_min && p.t_init <= p.t_max, prefix + "t_init", "must lie within [t_min, t_max]");
      break;
    }
    case DeviceKind::kPv:
      check(out, std::get<PvParams>(device).p_rated > 0.0, prefix + "p_rated", "must be positive");
      break;
  }
  return out;
}

double battery_soc_step(const BatteryParams& p, double soc, double power_kw, double dt_h) {
  return (1.0 - p.self_discharge) * soc - power_kw * dt_h * p.efficiency / p.capacity_kwh;
}

double battery_soc_step(const EvParams& p, double soc, double power_kw, double dt_h) {
  return battery_soc_step(p.battery, soc, power_kw, dt_h);
}

const char* to_string(HpMode mode) { return mode == HpMode::kCooling ? "cooling" : "heating"; }

HpMode hp_mode(double t_out, double reference) { return t_out >= reference ? HpMode::kCooling : HpMode::kHeating; }

double hp_temperature_step(const HpParams& p, double t_in, double t_out, double power_kw, double dt_h, HpMode mode) {
  require(power_kw <= 0.0, ErrorKind::kPrecondition, "heat pump power must be nonpositive");
  const double theta = p.theta(dt_h);
  const double drive = mode == HpMode::kCooling ? t_out + p.rho() * power_kw : t_out - p.rho() * power_kw;
  return theta * t_in + (1.0 - theta) * drive;
}

double hp_temperature_step(const HpParams& p, double t_in, double t_out, double power_kw, double dt_h) {
  return hp_temperature_step(p, t_in, t_out, power_kw, dt_h, hp_mode(t_out, t_in));
}

Interval feasible_power_interval(const Device& device, int t, double alpha_pv, int period) {
  switch (device_kind(device)) {
    case DeviceKind::kBattery: {
      const auto& p = std::get<BatteryParams>(device);
      return {p.p_min, p.p_max};
    }
    case DeviceKind::kEv: {
      const auto& p = std::get<EvParams>(device);
      if (p.away(t, period)) return {0.0, 0.0};
      return {p.battery.p_min, p.battery.p_max};
    }
    case DeviceKind::kHeatPump: return {-std::get<HpParams>(device).p_rated, 0.0};
    case DeviceKind::kPv: return {0.0, alpha_pv * std::get<PvParams>(device).p_rated};
  }
  return {};
}

namespace {

double cycling(std::span<const double> schedule, double weight) {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < schedule.size(); ++k) {
    const double d = schedule[k + 1] - schedule[k];
    sum += d * d;
  }
  return weight * sum;
}

}  // namespace

double der_objective(const Device& device, std::span<const double> schedule, std::span<const double> states,
                     const ObjectiveWeights& weights, const HorizonView& horizon) {
  const std::size_t h = schedule.size();
  require(static_cast<int>(h) == horizon.length, ErrorKind::kDimension, "schedule must span the horizon");
  const DeviceKind kind = device_kind(device);
  if (kind != DeviceKind::kPv)
    require(states.size() == h + 1, ErrorKind::kDimension, "states must have one entry more than the schedule");
  switch (kind) {
    case DeviceKind::kBattery: return cycling(schedule, weights.alpha_cyc);
    case DeviceKind::kEv: {
      const auto& p = std::get<EvParams>(device);
      double cost = cycling(schedule, weights.alpha_cyc);
      for (std::size_t k = 1; k <= h; ++k) {
        const int t = horizon.step(static_cast<int>(k));
        if (t % horizon.steps_per_day == p.target_step % horizon.steps_per_day) {
          const double e = states[k] - p.soc_target;
          cost += weights.xi_ev * e * e;
        }
      }
      return cost;
    }
    case DeviceKind::kHeatPump: {
      const auto& p = std::get<HpParams>(device);
      double sum = 0.0;
      for (std::size_t k = 1; k <= h; ++k) sum += (states[k] - p.t_setpoint) * (states[k] - p.t_setpoint);
      return weights.xi_ac * sum;
    }
    case DeviceKind::kPv: {
      const auto& p = std::get<PvParams>(device);
      require(horizon.irradiance_frac.size() >= h, ErrorKind::kDimension, "irradiance window too short");
      double sum = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double c = horizon.irradiance_frac[k] * p.p_rated - schedule[k];
        sum += c * c;
      }
      return weights.xi_pv * sum;
    }
  }
  return 0.0;
}

double utilization_objective(std::span<const double> pv, std::span<const double> bs, std::span<const double> ev,
                             double weight) {
  require(pv.size() == bs.size() && bs.size() == ev.size(), ErrorKind::kDimension,
          "utilization sequences must have equal length");
  double sum = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    const double v = pv[k] + bs[k] + ev[k];
    sum += v * v;
  }
  return weight * sum;
}

}  // namespace flexmarket
