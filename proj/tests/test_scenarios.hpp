#pragma once

#include <cmath>

#include "flexmarket/scenario.hpp"

namespace flexmarket::fixtures {

// Three homes over a short day; small enough for full-pipeline unit tests.
inline Scenario small_scenario(int total = 6, int horizon = 3) {
  Scenario s;
  s.name = "small";
  s.time.total_steps = total;
  s.time.horizon_len = horizon;
  const int n = total + horizon;
  for (int k = 0; k < n; ++k) {
    s.series.outdoor_temp.push_back(74.0 + 4.0 * std::sin(0.5 * k));
    s.series.irradiance_frac.push_back(std::max(0.0, std::sin(0.4 * k + 0.3)));
    s.series.lem_price.push_back(0.15 + 0.05 * std::cos(0.7 * k));
  }
  s.policy.beta.assign(total, 0.4);
  for (int i = 0; i < 3; ++i) {
    CmaSpec a;
    a.id = "home" + std::to_string(i + 1);
    a.gamma = 1.0 + 0.5 * i;
    BatteryParams b;
    b.id = "bs" + std::to_string(i + 1);
    b.capacity_kwh = 10.0;
    b.p_min = -4.0;
    b.p_max = 4.0;
    b.soc_min = 0.1;
    b.soc_max = 0.9;
    b.soc_init = 0.5;
    EvParams e;
    e.battery = b;
    e.battery.id = "ev" + std::to_string(i + 1);
    e.battery.capacity_kwh = 40.0;
    e.battery.soc_init = 0.6;
    e.away_start = 2;
    e.away_end = 3;
    e.soc_target = 0.7;
    e.target_step = 2;
    HpParams h;
    h.id = "hp" + std::to_string(i + 1);
    h.r_th = 2.0;
    h.c_th = 4.75;
    h.cop = 3.0;
    h.p_rated = 3.0;
    h.t_min = 67.0;
    h.t_max = 73.0;
    h.t_setpoint = 70.0;
    h.t_init = 70.0;
    a.devices = {b, e, h, PvParams{"pv" + std::to_string(i + 1), 2.0}};
    a.fixed_load.assign(n, 3.0 + 0.5 * i);
    s.agents.push_back(a);
  }
  return s;
}

}  // namespace flexmarket::fixtures
