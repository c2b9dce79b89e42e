#pragma once

#include <string>
#include <vector>

#include "flexmarket/miqp.hpp"
#include "flexmarket/scenario.hpp"

namespace flexmarket {

/// Variable indices of one device inside the MPO; -1 where not applicable.
struct DeviceVars {
  DeviceKind kind = DeviceKind::kPv;
  std::vector<Index> power, flex;       // per step
  std::vector<Index> plus, minus, z;    // BS / EV only
  std::vector<Index> state;             // H + 1 entries, BS / EV / HP
  std::vector<HpMode> modes;            // HP only
};

struct Mpo {
  MixedIntegerQp miqp;
  std::vector<DeviceVars> devices;  // aligned with CmaSpec::devices
  std::vector<double> fixed_load;   // horizon window, kW consumed
};

/// Stage-I multiperiod program for agent `agent` of the view. Throws
/// kPrecondition for an agent without devices and without load.
Mpo build_mpo(const CmaSpec& spec, const HorizonView& view, const ObjectiveWeights& weights, std::size_t agent = 0);

struct DevicePlan {
  std::string id;
  DeviceKind kind = DeviceKind::kPv;
  std::vector<double> power;   // P^{d*} per step
  std::vector<double> flex;    // δ^{d*} per step
  std::vector<double> states;  // H + 1 entries, empty for PV
  std::vector<HpMode> modes;   // HP only
};

struct FlexibilityOffer {
  double p0 = 0.0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  std::vector<DevicePlan> devices;
  std::vector<double> total;  // P^total per step, fixed load included
  double objective = 0.0;
  MiqpStatus status = MiqpStatus::kOptimal;
  double gap = 0.0;
  int nodes = 0;

  double range() const { return p_hi - p0; }
};

struct Bid {
  double p_star = 0.0;
};

MiqpSettings miqp_settings(const SolverConfig& cfg);

/// Solves the MPO and reports the first-step offer. Throws kInfeasible when the
/// MPO has no integer-feasible point.
FlexibilityOffer solve_flexibility(const CmaSpec& spec, const HorizonView& view, const ObjectiveWeights& weights,
                                   const SolverConfig& cfg, std::size_t agent = 0);

/// Welfare-maximizing injection on [p0, p_hi]. Throws kPrecondition when
/// gamma ≤ 0, p_hi < p0 or mu + mu_tilde < 0.
Bid best_response(double gamma, double p0, double p_hi, double mu, double mu_tilde);

/// μ̃(p − p0) + μp − γ(p − p0)².
double cma_welfare(double gamma, double p0, double p, double mu, double mu_tilde);

/// First-step device outcome once the bid is settled.
struct DeviceSettlement {
  double power = 0.0;
  DeviceState before;
  DeviceState after;
  HpMode mode = HpMode::kCooling;  // HP only
};

/// Splits bid − p0 over the devices in proportion to their first-step δ and
/// advances every state one step with the devices module.
std::vector<DeviceSettlement> settle_devices(const CmaSpec& spec, const FlexibilityOffer& offer,
                                             const std::vector<DeviceState>& states, double bid, double t_out,
                                             double dt_hours);

}  // namespace flexmarket
