#pragma once

#include <vector>

#include "flexmarket/agent.hpp"

namespace flexmarket {

struct MemberFlex {
  double gamma = 1.0;
  double p0 = 0.0;
  double p_hi = 0.0;

  double range() const { return p_hi - p0; }
};

struct AggregateFlex {
  double p0_t = 0.0;
  double p_lo_t = 0.0;
  double p_hi_t = 0.0;
  /// Σ 1/γᵢ over members with a positive range (over all members if none has one).
  double gamma_t = 0.0;
  std::vector<MemberFlex> members;
};

struct PriceSignal {
  double mu = 0.0;
  double mu_tilde = 0.0;
  bool positivity_ok = false;
  bool saturation_ok = false;
  bool degenerate = false;  // P̃ = P⁰ₜ: flexibility market closed
};

/// Throws kPrecondition on empty input, mismatched lengths or nonpositive gammas.
AggregateFlex aggregate_offers(const std::vector<FlexibilityOffer>& offers, const std::vector<double>& gammas);

/// Closed-form leader prices for the request p_tilde. Throws kPrecondition when
/// P⁰ₜ = 0 or p_tilde lies outside [P⁰ₜ, P̄ₜ].
PriceSignal compute_prices(const AggregateFlex& agg, double p_tilde, double pi);

/// Admissible requests as an interval with optionally open ends.
struct Region {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_open = false;
  bool hi_open = false;

  bool empty() const { return (lo_open || hi_open) ? !(lo < hi) : lo > hi; }
  bool contains(double p) const { return (lo_open ? p > lo : p >= lo) && (hi_open ? p < hi : p <= hi); }
};

/// Requests with the sign of P⁰ₜ for which μ > 0 and μ̃ > 0. Throws kPrecondition when P⁰ₜ = 0.
Region positivity_region(const AggregateFlex& agg, double pi);

/// Largest request keeping μ + μ̃ < 2γᵢ(P̄ᵢ − P⁰ᵢ) for every flexible member
/// (the bound itself is excluded). Returns P⁰ₜ when no member is flexible.
double saturation_limit(const AggregateFlex& agg);

/// |μ̃(Pₜ − P⁰ₜ) + μPₜ − πPₜ| with Pₜ = Σ bids.
double budget_residual(const PriceSignal& prices, const std::vector<Bid>& bids, const AggregateFlex& agg, double pi);

/// True iff the residual is within tol·max(1, |πPₜ|).
bool check_budget_balance(const PriceSignal& prices, const std::vector<Bid>& bids, const AggregateFlex& agg, double pi,
                          double tol);

bool check_no_saturation(const PriceSignal& prices, const std::vector<double>& gammas,
                         const std::vector<FlexibilityOffer>& offers);
bool check_no_saturation(const PriceSignal& prices, const AggregateFlex& agg);

/// −(Σ bids − P̃)².
double cmo_utility(const std::vector<Bid>& bids, double p_tilde);

/// Outcome of moving a requested setpoint into the admissible set.
struct ClipResult {
  double p_tilde = 0.0;
  bool clipped = false;
  bool feasible = true;  // false when the admissible set is empty
};

/// Projects `requested` into positivity_region (and below saturation_limit when
/// `no_saturation` is set), inset by 1e-6 relative to the interval width.
ClipResult clip_request(const AggregateFlex& agg, double pi, double requested, bool positivity, bool no_saturation);

}  // namespace flexmarket
