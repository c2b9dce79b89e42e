#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flexmarket/operator.hpp"

namespace flexmarket {

struct ClearingResult {
  int step = 0;
  double pi = 0.0;
  AggregateFlex agg;
  double p_requested = 0.0;  // policy request before clipping
  double p_tilde = 0.0;
  bool clipped = false;
  PriceSignal prices;
  std::vector<Bid> bids;
  std::vector<double> flex_payment;    // μ̃(Pᵢ − P⁰ᵢ)
  std::vector<double> energy_payment;  // μPᵢ
  double lem_settlement = 0.0;         // πPₜ
  double budget_residual = 0.0;
  double tracking_error = 0.0;

  double total_bid() const;
};

/// Steps 5–7 of one clearing: prices, best responses and settlement. A request
/// equal to P⁰ₜ closes the flexibility market: μ = π, μ̃ = 0 and every bid is P⁰ᵢ.
/// Throws kPrecondition when p_tilde lies outside [P⁰ₜ, P̄ₜ].
ClearingResult clear_market(const std::vector<FlexibilityOffer>& offers, const std::vector<double>& gammas,
                            double p_tilde, double pi);
/// Same, from an aggregate that already carries the member offers.
ClearingResult clear_market(const AggregateFlex& agg, double p_tilde, double pi);

struct AgentRecord {
  int step = 0;
  std::string agent;
  double gamma = 0.0;
  double p0 = 0.0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  double bid = 0.0;
  double flex_payment = 0.0;
  double energy_payment = 0.0;
  double welfare = 0.0;
  double mpo_objective = 0.0;
  double mpo_gap = 0.0;
  int mpo_nodes = 0;
  std::string mpo_status;
};

struct DeviceRecord {
  int step = 0;
  std::string agent;
  std::string device;
  DeviceKind kind = DeviceKind::kPv;
  double planned_power = 0.0;
  double flex = 0.0;
  double settled_power = 0.0;
  double state_before = 0.0;
  double state_after = 0.0;
  double t_out = 0.0;
  HpMode mode = HpMode::kCooling;
};

struct SimulationTrace {
  std::vector<ClearingResult> clearings;
  std::vector<AgentRecord> agents;
  std::vector<DeviceRecord> devices;
  nlohmann::json metadata;
};

/// Receding-horizon day: stage-I offers, aggregation, policy request, clearing
/// and settlement at every step. Errors are rethrown with the step attached.
SimulationTrace run_simulation(const Scenario& s);

struct EquilibriumReport {
  std::vector<double> improvement;  // per agent, best grid welfare minus bid welfare
  double grid_slack = 0.0;          // largest γᵢh² over agents
  double cmo_utility = 0.0;
  double budget_residual = 0.0;
  bool nash_ok = false;
  bool stackelberg_ok = false;
  bool pass = false;
};

/// Nash: no grid point on [P⁰ᵢ, P̄ᵢ] beats the bid by more than tol + γᵢh².
/// Stackelberg: cmo_utility ≥ −tol. When the flexibility market is closed the
/// interval is {P⁰ᵢ}. Throws kPrecondition when grid_points < 100.
EquilibriumReport verify_equilibrium(const ClearingResult& cr, int grid_points = 10000, double tol = 1e-6);
EquilibriumReport verify_equilibrium(const ClearingResult& cr, const std::vector<FlexibilityOffer>& offers,
                                     const std::vector<double>& gammas, int grid_points = 10000, double tol = 1e-6);

/// clearings.csv, agents.csv, devices.csv and metadata.json in `dir`.
void write_trace(const SimulationTrace& trace, const std::filesystem::path& dir);
/// Inverse of write_trace. Throws kFileMissing / kParse.
SimulationTrace read_trace(const std::filesystem::path& dir);

}  // namespace flexmarket
