#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flexmarket/agent.hpp"
#include "oracles.hpp"

using namespace flexmarket;

namespace {

Scenario tiny(int total, int horizon, std::vector<Device> devices, double load, double irradiance = 0.5,
              double t_out = 75.0) {
  Scenario s;
  s.time.total_steps = total;
  s.time.horizon_len = horizon;
  const int n = total + horizon - 1;
  s.series.outdoor_temp.assign(n, t_out);
  s.series.irradiance_frac.assign(n, irradiance);
  s.series.lem_price.assign(n, 0.2);
  s.policy.beta.assign(total, 0.0);
  CmaSpec a;
  a.id = "home";
  a.devices = std::move(devices);
  a.fixed_load.assign(total + horizon, load);
  s.agents.push_back(a);
  return s;
}

BatteryParams battery(double soc0 = 0.5) {
  BatteryParams b;
  b.id = "bs";
  b.capacity_kwh = 10.0;
  b.p_min = -4.0;
  b.p_max = 4.0;
  b.soc_min = 0.1;
  b.soc_max = 0.9;
  b.soc_init = soc0;
  return b;
}

EvParams ev() {
  EvParams e;
  e.battery = battery(0.6);
  e.battery.id = "ev";
  e.battery.capacity_kwh = 40.0;
  e.battery.p_min = -6.0;
  e.battery.p_max = 6.0;
  e.away_start = 2;
  e.away_end = 3;
  e.soc_target = 0.8;
  e.target_step = 2;
  return e;
}

HpParams heat_pump() {
  HpParams h;
  h.id = "hp";
  h.r_th = 2.0;
  h.c_th = 4.75;
  h.cop = 3.0;
  h.p_rated = 3.0;
  h.t_min = 67.0;
  h.t_max = 73.0;
  h.t_setpoint = 70.0;
  h.t_init = 70.0;
  return h;
}

PvParams pv() { return PvParams{"pv", 4.0}; }

FlexibilityOffer offer_for(const Scenario& s, int t = 0) {
  return solve_flexibility(s.agents[0], slice_horizon(s, t), s.weights, s.solver);
}

}  // namespace

TEST(BuildMpo, FixedLoadOnlyHasNoBinariesAndNoFlexibility) {
  const Scenario s = tiny(4, 2, {}, 5.0);
  const Mpo m = build_mpo(s.agents[0], slice_horizon(s, 0), s.weights);
  EXPECT_TRUE(m.miqp.binary_vars.empty());
  EXPECT_EQ(m.miqp.base.num_vars(), 0);
  const FlexibilityOffer o = offer_for(s);
  EXPECT_DOUBLE_EQ(o.p0, -5.0);
  EXPECT_DOUBLE_EQ(o.p_lo, -5.0);
  EXPECT_DOUBLE_EQ(o.p_hi, -5.0);
  EXPECT_EQ(o.total, std::vector<double>(2, -5.0));
}

TEST(BuildMpo, BatteryPlusEvHasTwoBinariesPerStep) {
  const Scenario s = tiny(8, 4, {battery(), ev()}, 1.0);
  const Mpo m = build_mpo(s.agents[0], slice_horizon(s, 0), s.weights);
  EXPECT_EQ(m.miqp.binary_vars.size(), 8u);
  EXPECT_EQ(m.miqp.pairs.size(), 8u);
}

TEST(BuildMpo, AgentWithoutDevicesOrLoadIsRejected) {
  const Scenario s = tiny(4, 2, {}, 0.0);
  try {
    build_mpo(s.agents[0], slice_horizon(s, 0), s.weights);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(BuildMpo, TerminalSocEqualityOnlyOnFinalHorizon) {
  const Scenario s = tiny(4, 2, {battery()}, 1.0);
  const Mpo early = build_mpo(s.agents[0], slice_horizon(s, 0), s.weights);
  const Mpo last = build_mpo(s.agents[0], slice_horizon(s, 2), s.weights);
  const Index end_early = early.devices[0].state.back();
  const Index end_last = last.devices[0].state.back();
  EXPECT_LT(early.miqp.base.lower[end_early], early.miqp.base.upper[end_early]);
  EXPECT_DOUBLE_EQ(last.miqp.base.lower[end_last], 0.5);
  EXPECT_DOUBLE_EQ(last.miqp.base.upper[end_last], 0.5);
  const FlexibilityOffer o = offer_for(s, 2);
  EXPECT_NEAR(o.devices[0].states.back(), 0.5, 1e-7);
}

TEST(SolveFlexibility, FixedLoadOnlyOffer) {
  const FlexibilityOffer o = offer_for(tiny(4, 2, {}, 5.0));
  EXPECT_EQ(o.p0, -5.0);
  EXPECT_EQ(o.range(), 0.0);
}

TEST(SolveFlexibility, PvAtNightOffersNothing) {
  const FlexibilityOffer o = offer_for(tiny(4, 2, {pv()}, 2.0, 0.0));
  EXPECT_DOUBLE_EQ(o.p0, -2.0);
  EXPECT_DOUBLE_EQ(o.p_lo, -2.0);
  EXPECT_DOUBLE_EQ(o.p_hi, -2.0);
  EXPECT_EQ(o.devices[0].power[0], 0.0);
  EXPECT_EQ(o.devices[0].flex[0], 0.0);
}

TEST(SolveFlexibility, BatteryOnlyMatchesLeafEnumeration) {
  for (double soc0 : {0.5, 0.12, 0.88}) {
    for (int h : {2, 3, 4}) {
      Scenario s = tiny(8, h, {battery(soc0)}, 1.0);
      s.solver.node_limit = 1000;
      const HorizonView v = slice_horizon(s, 0);
      const Mpo m = build_mpo(s.agents[0], v, s.weights);
      const FlexibilityOffer o = solve_flexibility(s.agents[0], v, s.weights, s.solver);
      EXPECT_EQ(o.status, MiqpStatus::kOptimal);
      const double ref = oracle::enumerate_leaves(m.miqp);
      EXPECT_NEAR(o.objective, ref, 1e-6 * std::max(1.0, std::abs(ref))) << "soc0 " << soc0 << " h " << h;
    }
  }
}

// Independent oracle for a two-step battery: δ enters only linearly, so for fixed
// (P0, P1) its best value is the tightest upper bound; the rest is a 2-D search.
TEST(SolveFlexibility, BatteryTwoStepMatchesGridSearch) {
  const BatteryParams b = battery(0.3);
  const Scenario s = tiny(6, 2, {b}, 1.5);
  const ObjectiveWeights& w = s.weights;
  const double eps1 = s.agents[0].eps_lo, eps2 = s.agents[0].eps_hi;
  const double c = b.efficiency / b.capacity_kwh;
  auto value = [&](double p0, double p1) {
    const double soc1 = b.soc_init - c * p0, soc2 = soc1 - c * p1;
    if (soc1 < b.soc_min || soc1 > b.soc_max || soc2 < b.soc_min || soc2 > b.soc_max || soc2 < b.soc_init)
      return kInf;
    double total = 0.0;
    const double socs[2] = {soc1, soc2};
    const double ps[2] = {p0, p1};
    for (int k = 0; k < 2; ++k) {
      const double p = ps[k];
      const double hi = std::min({eps2 * std::abs(p), b.p_max - p, p - b.p_min, (socs[k] - b.soc_min) / c});
      if (hi < eps1 * std::abs(p) - 1e-12) return kInf;
      total += -hi - p + w.utilization * p * p;
    }
    return total + w.alpha_cyc * (p1 - p0) * (p1 - p0) + 2 * 1.5;
  };
  double best = kInf, bp0 = 0, bp1 = 0;
  const int n = 400;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double p0 = b.p_min + (b.p_max - b.p_min) * i / n, p1 = b.p_min + (b.p_max - b.p_min) * j / n;
      const double v = value(p0, p1);
      if (v < best) best = v, bp0 = p0, bp1 = p1;
    }
  for (double step = (b.p_max - b.p_min) / n; step > 1e-10; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto [d0, d1] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}) {
        const double v = value(bp0 + d0 * step, bp1 + d1 * step);
        if (v < best - 1e-15) {
          best = v, bp0 += d0 * step, bp1 += d1 * step;
          moved = true;
        }
      }
    }
  }
  const FlexibilityOffer o = offer_for(s);
  EXPECT_NEAR(o.objective, best, 1e-5);
  EXPECT_NEAR(o.devices[0].power[0], bp0, 1e-3);
  EXPECT_NEAR(o.devices[0].power[1], bp1, 1e-3);
}

TEST(SolveFlexibility, OfferInvariantsOnMixedHome) {
  const Scenario s = tiny(8, 5, {battery(), ev(), heat_pump(), pv()}, 1.2);
  for (int t : {0, 2, 3}) {
    const FlexibilityOffer o = offer_for(s, t);
    const CmaSpec& spec = s.agents[0];
    double sum0 = -1.2, flex0 = 0.0;
    for (const DevicePlan& d : o.devices) {
      sum0 += d.power[0];
      flex0 += d.flex[0];
    }
    EXPECT_DOUBLE_EQ(o.p0, sum0);
    EXPECT_NEAR(o.p_hi - o.p0, o.p0 - o.p_lo, 1e-12);
    EXPECT_NEAR(o.p_hi - o.p0, flex0, 1e-12);
    EXPECT_LE(o.p_lo, o.p0);
    EXPECT_LE(o.p0, o.p_hi);
    const HorizonView v = slice_horizon(s, t);
    for (std::size_t d = 0; d < o.devices.size(); ++d) {
      const DevicePlan& plan = o.devices[d];
      for (std::size_t k = 0; k < plan.power.size(); ++k) {
        const double mag = std::abs(plan.power[k]);
        EXPECT_GE(plan.flex[k], spec.eps_lo * mag - 1e-6) << plan.id << " k " << k;
        EXPECT_LE(plan.flex[k], spec.eps_hi * mag + 1e-6) << plan.id << " k " << k;
        const Interval lim =
            feasible_power_interval(spec.devices[d], v.step(static_cast<int>(k)), v.irradiance_frac[k], 24);
        EXPECT_GE(plan.power[k] - plan.flex[k], lim.lo - 1e-6);
        EXPECT_LE(plan.power[k] + plan.flex[k], lim.hi + 1e-6);
      }
    }
  }
}

TEST(SolveFlexibility, PlannedStatesResimulateWithinBounds) {
  const Scenario s = tiny(8, 5, {battery(), ev(), heat_pump(), pv()}, 1.2, 0.6, 78.0);
  const HorizonView v = slice_horizon(s, 1);
  const FlexibilityOffer o = solve_flexibility(s.agents[0], v, s.weights, s.solver);
  const BatteryParams& b = std::get<BatteryParams>(s.agents[0].devices[0]);
  const EvParams& e = std::get<EvParams>(s.agents[0].devices[1]);
  const HpParams& hp = std::get<HpParams>(s.agents[0].devices[2]);
  double soc = b.soc_init, evs = e.battery.soc_init, temp = hp.t_init;
  for (int k = 0; k < v.length; ++k) {
    soc = battery_soc_step(b, soc, o.devices[0].power[k], 1.0);
    evs = battery_soc_step(e, evs, o.devices[1].power[k], 1.0);
    temp = hp_temperature_step(hp, temp, v.outdoor_temp[k], std::min(0.0, o.devices[2].power[k]), 1.0,
                               o.devices[2].modes[k]);
    EXPECT_NEAR(soc, o.devices[0].states[k + 1], 1e-6);
    EXPECT_NEAR(evs, o.devices[1].states[k + 1], 1e-6);
    EXPECT_NEAR(temp, o.devices[2].states[k + 1], 1e-5);
    EXPECT_GE(soc, b.soc_min - 1e-6);
    EXPECT_LE(soc, b.soc_max + 1e-6);
    EXPECT_GE(temp, hp.t_min - 1e-6);
    EXPECT_LE(temp, hp.t_max + 1e-6);
  }
}

TEST(SolveFlexibility, EvIsIdleWhileAway) {
  const Scenario s = tiny(8, 4, {ev()}, 1.0);
  const FlexibilityOffer o = offer_for(s, 1);
  // Steps 2 and 3 are the away window: window positions 1 and 2.
  for (int k : {1, 2}) {
    EXPECT_EQ(o.devices[0].power[k], 0.0);
    EXPECT_EQ(o.devices[0].flex[k], 0.0);
  }
}

TEST(BestResponse, InteriorExample) { EXPECT_DOUBLE_EQ(best_response(1.0, -5.0, -3.0, 1.0, 1.0).p_star, -4.0); }

TEST(BestResponse, SaturatedExample) { EXPECT_DOUBLE_EQ(best_response(1.0, -5.0, -3.0, 3.0, 3.0).p_star, -3.0); }

TEST(BestResponse, ZeroPricesBidBaseline) { EXPECT_DOUBLE_EQ(best_response(2.0, -5.0, -3.0, 0.0, 0.0).p_star, -5.0); }

TEST(BestResponse, BoundaryIsContinuous) {
  // 2γ(P̄ − P⁰) = μ + μ̃ exactly: both branches give P̄.
  EXPECT_DOUBLE_EQ(best_response(1.0, -5.0, -3.0, 2.0, 2.0).p_star, -3.0);
}

TEST(BestResponse, RejectsBadInput) {
  for (auto f : {+[] { best_response(0.0, -5, -3, 1, 1); }, +[] { best_response(1.0, -3, -5, 1, 1); },
                 +[] { best_response(1.0, -5, -3, -2, 1); }}) {
    try {
      f();
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
    }
  }
}

TEST(BestResponse, MatchesGridSearchAndIsMonotone) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double gamma = 0.1 + 4.0 * u(rng);
    const double p0 = -20.0 + 18.0 * u(rng);
    const double p_hi = p0 + 5.0 * u(rng);
    const double mu = 3.0 * u(rng), mt = 3.0 * u(rng);
    const double bid = best_response(gamma, p0, p_hi, mu, mt).p_star;
    ASSERT_GE(bid, p0);
    ASSERT_LE(bid, p_hi);
    const int n = 10000;
    const double best = oracle::grid_best_welfare(gamma, p0, p_hi, mu, mt, n);
    const double h = (p_hi - p0) / (n - 1);
    EXPECT_GE(cma_welfare(gamma, p0, bid, mu, mt), best - 1e-9 - gamma * h * h);
    EXPECT_LE(best_response(gamma, p0, p_hi, mu, mt).p_star, best_response(gamma, p0, p_hi, mu + 0.1, mt).p_star);
  }
}

TEST(CmaWelfare, Examples) {
  EXPECT_DOUBLE_EQ(cma_welfare(1.0, -5.0, -5.0, 0.7, 0.3), 0.7 * -5.0);
  EXPECT_DOUBLE_EQ(cma_welfare(1.0, -5.0, -4.0, 1.0, 1.0), -4.0);
  EXPECT_LT(cma_welfare(1.0, -5.0, -4.5, 0.0, 0.0), cma_welfare(1.0, -5.0, -5.0, 0.0, 0.0));
}

TEST(SettleDevices, DeviationFollowsFlexShares) {
  const Scenario s = tiny(8, 4, {battery(), pv()}, 1.0, 0.8);
  const HorizonView v = slice_horizon(s, 0);
  const FlexibilityOffer o = solve_flexibility(s.agents[0], v, s.weights, s.solver);
  ASSERT_GT(o.range(), 0.0);
  const double bid = o.p0 + 0.5 * o.range();
  const auto settled = settle_devices(s.agents[0], o, v.states[0], bid, v.outdoor_temp[0], 1.0);
  double total = -1.0;
  for (std::size_t d = 0; d < settled.size(); ++d) {
    total += settled[d].power;
    EXPECT_NEAR(settled[d].power - o.devices[d].power[0], 0.5 * o.devices[d].flex[0], 1e-12);
  }
  EXPECT_NEAR(total, bid, 1e-12);
  const BatteryParams& b = std::get<BatteryParams>(s.agents[0].devices[0]);
  EXPECT_DOUBLE_EQ(settled[0].after.value, battery_soc_step(b, b.soc_init, settled[0].power, 1.0));
  EXPECT_EQ(settled[1].after, settled[1].before);
}

TEST(SettleDevices, FullUpwardDeviationKeepsStatesFeasible) {
  const Scenario s = tiny(8, 4, {battery(0.12), ev(), heat_pump(), pv()}, 1.0, 0.3, 78.0);
  const HorizonView v = slice_horizon(s, 0);
  const FlexibilityOffer o = solve_flexibility(s.agents[0], v, s.weights, s.solver);
  const auto settled = settle_devices(s.agents[0], o, v.states[0], o.p_hi, v.outdoor_temp[0], 1.0);
  EXPECT_GE(settled[0].after.value, 0.1 - 1e-6);
  EXPECT_GE(settled[1].after.value, 0.1 - 1e-6);
  EXPECT_LE(settled[2].after.value, 73.0 + 1e-6);
  EXPECT_EQ(settled[2].mode, HpMode::kCooling);
}
