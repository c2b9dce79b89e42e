#include "flexmarket/operator.hpp"

#include <algorithm>
#include <cmath>

namespace flexmarket {

AggregateFlex aggregate_offers(const std::vector<FlexibilityOffer>& offers, const std::vector<double>& gammas) {
  require(!offers.empty(), ErrorKind::kPrecondition, "at least one offer required");
  require(offers.size() == gammas.size(), ErrorKind::kPrecondition, "one gamma per offer required");
  AggregateFlex agg;
  double all = 0.0, flexible = 0.0;
  for (std::size_t i = 0; i < offers.size(); ++i) {
    require(gammas[i] > 0.0, ErrorKind::kPrecondition, "gammas must be positive");
    const FlexibilityOffer& o = offers[i];
    agg.p0_t += o.p0;
    agg.p_lo_t += o.p_lo;
    agg.p_hi_t += o.p_hi;
    agg.members.push_back({gammas[i], o.p0, o.p_hi});
    all += 1.0 / gammas[i];
    if (o.p_hi > o.p0) flexible += 1.0 / gammas[i];
  }
  agg.gamma_t = flexible > 0.0 ? flexible : all;
  return agg;
}

namespace {

bool is_degenerate(const AggregateFlex& agg, double p_tilde) {
  return std::abs(p_tilde - agg.p0_t) <= 1e-12 * std::max(1.0, std::abs(agg.p0_t));
}

}  // namespace

PriceSignal compute_prices(const AggregateFlex& agg, double p_tilde, double pi) {
  require(agg.p0_t != 0.0, ErrorKind::kPrecondition, "aggregate baseline P0_t must be nonzero");
  const double slack = 1e-9 * std::max(1.0, std::abs(agg.p_hi_t));
  require(p_tilde >= agg.p0_t - slack && p_tilde <= agg.p_hi_t + slack, ErrorKind::kPrecondition,
          "requested setpoint lies outside [P0_t, P_hi_t]");
  PriceSignal s;
  if (is_degenerate(agg, p_tilde)) {
    s.mu = pi;
    s.mu_tilde = 0.0;
    s.degenerate = true;
  } else {
    const double g = agg.gamma_t, p0 = agg.p0_t, dp = p_tilde - p0;
    s.mu = pi * p_tilde / p0 - 2.0 * dp * dp / (g * p0);
    s.mu_tilde = p_tilde * (2.0 * dp - pi * g) / (g * p0);
  }
  // The closed form assumes P̃ keeps the sign of P⁰ₜ; a crossing is flagged, not rejected.
  s.positivity_ok = s.mu > 0.0 && s.mu_tilde > 0.0 && p_tilde * agg.p0_t > 0.0;
  s.saturation_ok = check_no_saturation(s, agg);
  return s;
}

Region positivity_region(const AggregateFlex& agg, double pi) {
  const double p0 = agg.p0_t, g = agg.gamma_t;
  require(p0 != 0.0, ErrorKind::kPrecondition, "aggregate baseline P0_t must be nonzero");
  const double tilde_edge = p0 + pi * g / 2.0;
  Region r;
  r.lo = tilde_edge;
  r.lo_open = true;
  if (p0 < 0.0) {
    r.hi = std::min(agg.p_hi_t, 0.0);
    return r;
  }
  const double disc = pi * g / 2.0 * (4.0 * p0 + pi * g / 2.0);
  const double root = 0.5 * std::sqrt(std::max(disc, 0.0));
  const double a1 = p0 + pi * g / 4.0 - root;
  const double a2 = p0 + pi * g / 4.0 + root;
  if (a1 > tilde_edge) r.lo = a1;
  if (a2 < agg.p_hi_t) {
    r.hi = a2;
    r.hi_open = true;
  } else {
    r.hi = agg.p_hi_t;
  }
  return r;
}

double saturation_limit(const AggregateFlex& agg) {
  double tightest = kInf;
  for (const MemberFlex& m : agg.members)
    if (m.range() > 0.0) tightest = std::min(tightest, m.gamma * m.range());
  if (!std::isfinite(tightest)) return agg.p0_t;
  return agg.p0_t + agg.gamma_t * tightest;
}

double budget_residual(const PriceSignal& prices, const std::vector<Bid>& bids, const AggregateFlex& agg, double pi) {
  double total = 0.0;
  for (const Bid& b : bids) total += b.p_star;
  return std::abs(prices.mu_tilde * (total - agg.p0_t) + prices.mu * total - pi * total);
}

bool check_budget_balance(const PriceSignal& prices, const std::vector<Bid>& bids, const AggregateFlex& agg, double pi,
                          double tol) {
  double total = 0.0;
  for (const Bid& b : bids) total += b.p_star;
  return budget_residual(prices, bids, agg, pi) <= tol * std::max(1.0, std::abs(pi * total));
}

bool check_no_saturation(const PriceSignal& prices, const std::vector<double>& gammas,
                         const std::vector<FlexibilityOffer>& offers) {
  const double s = prices.mu + prices.mu_tilde;
  for (std::size_t i = 0; i < offers.size() && i < gammas.size(); ++i) {
    const double range = offers[i].p_hi - offers[i].p0;
    if (range > 0.0 && !(s < 2.0 * gammas[i] * range)) return false;
  }
  return true;
}

bool check_no_saturation(const PriceSignal& prices, const AggregateFlex& agg) {
  const double s = prices.mu + prices.mu_tilde;
  for (const MemberFlex& m : agg.members)
    if (m.range() > 0.0 && !(s < 2.0 * m.gamma * m.range())) return false;
  return true;
}

double cmo_utility(const std::vector<Bid>& bids, double p_tilde) {
  double total = 0.0;
  for (const Bid& b : bids) total += b.p_star;
  return -(total - p_tilde) * (total - p_tilde);
}

ClipResult clip_request(const AggregateFlex& agg, double pi, double requested, bool positivity, bool no_saturation) {
  ClipResult out;
  out.p_tilde = requested;
  // A request at (or below) the baseline asks for no flexibility and stays degenerate.
  if (requested <= agg.p0_t || (!positivity && !no_saturation)) return out;
  Region a{agg.p0_t, agg.p_hi_t, false, false};
  auto tighten_lo = [&](double v, bool open) {
    if (v > a.lo || (v == a.lo && open)) {
      a.lo = v;
      a.lo_open = open;
    }
  };
  auto tighten_hi = [&](double v, bool open) {
    if (v < a.hi || (v == a.hi && open)) {
      a.hi = v;
      a.hi_open = open;
    }
  };
  if (positivity) {
    const Region r = positivity_region(agg, pi);
    tighten_lo(r.lo, r.lo_open);
    tighten_hi(r.hi, r.hi_open);
  }
  if (no_saturation) tighten_hi(saturation_limit(agg), true);
  if (a.empty()) {
    out.feasible = false;
    return out;
  }
  if (a.contains(requested)) return out;
  const double inset = 1e-6 * (a.hi - a.lo);
  out.clipped = true;
  if (requested <= a.lo) {
    out.p_tilde = a.lo + inset;
  } else {
    out.p_tilde = a.hi - inset;
  }
  return out;
}

}  // namespace flexmarket
