#include "flexmarket/agent.hpp"

#include <algorithm>
#include <cmath>

namespace flexmarket {

namespace {

std::string name(const std::string& dev, const char* what, int k) { return dev + "." + what + "[" + std::to_string(k) + "]"; }

// SOC state, dynamics and robust lower-SOC rows shared by BS and EV.
// δ and P carry no explicit bounds unless P is pinned: flex_min already forces
// δ ≥ ε₁|P| ≥ 0 and the envelope rows bound P, and duplicate bounds make every
// idle step a degenerate vertex for the QP.
void add_storage(QpBuilder& b, MixedIntegerQp& m, DeviceVars& v, const BatteryParams& p, double soc0,
                 const std::vector<Interval>& limits, const CmaSpec& spec, const HorizonView& view) {
  const int h = view.length;
  const double dt = view.dt_hours;
  const double c = dt * p.efficiency / p.capacity_kwh;
  for (int k = 0; k <= h; ++k) {
    if (k == 0) v.state.push_back(b.add_variable(soc0, soc0, name(p.id, "soc", k)));
    else v.state.push_back(b.add_variable(p.soc_min, p.soc_max, name(p.id, "soc", k)));
  }
  for (int k = 0; k < h; ++k) {
    const Interval lim = limits[k];
    const Index pk = lim.lo == lim.hi ? b.add_variable(lim.lo, lim.hi, name(p.id, "p", k))
                                      : b.add_variable(-kInf, kInf, name(p.id, "p", k));
    const Index dk = b.add_variable(-kInf, kInf, name(p.id, "delta", k));
    const Index pp = b.add_variable(0.0, std::max(lim.hi, 0.0), name(p.id, "p_plus", k));
    const Index pm = b.add_variable(0.0, std::max(-lim.lo, 0.0), name(p.id, "p_minus", k));
    double z_lo = 0.0, z_hi = 1.0;
    if (lim.lo >= 0.0) z_lo = 1.0;
    else if (lim.hi <= 0.0) z_hi = 0.0;
    const Index zk = b.add_variable(z_lo, z_hi, name(p.id, "z", k));
    v.power.push_back(pk);
    v.flex.push_back(dk);
    v.plus.push_back(pp);
    v.minus.push_back(pm);
    v.z.push_back(zk);
    m.binary_vars.push_back(zk);
    m.pairs.push_back({zk, pp, pm});

    b.add_row({{pk, 1.0}, {pp, -1.0}, {pm, 1.0}}, RowSense::kEqual, 0.0, name(p.id, "split", k));
    if (lim.hi > 0.0)
      m.bigm_rows.push_back(b.add_row({{pp, 1.0}, {zk, -lim.hi}}, RowSense::kLessEqual, 0.0, name(p.id, "gate_plus", k)));
    if (lim.lo < 0.0)
      m.bigm_rows.push_back(
          b.add_row({{pm, 1.0}, {zk, -lim.lo}}, RowSense::kLessEqual, -lim.lo, name(p.id, "gate_minus", k)));
    b.add_row({{dk, 1.0}, {pp, -spec.eps_lo}, {pm, -spec.eps_lo}}, RowSense::kGreaterEqual, 0.0,
              name(p.id, "flex_min", k));
    b.add_row({{dk, 1.0}, {pp, -spec.eps_hi}, {pm, -spec.eps_hi}}, RowSense::kLessEqual, 0.0,
              name(p.id, "flex_max", k));
    b.add_row({{pk, 1.0}, {dk, -1.0}}, RowSense::kGreaterEqual, lim.lo, name(p.id, "env_lo", k));
    b.add_row({{pk, 1.0}, {dk, 1.0}}, RowSense::kLessEqual, lim.hi, name(p.id, "env_hi", k));
    b.add_row({{v.state[k + 1], 1.0}, {v.state[k], -(1.0 - p.self_discharge)}, {pk, c}}, RowSense::kEqual, 0.0,
              name(p.id, "soc_dyn", k));
    // The settled injection may exceed the plan by up to δ, which drains SOC.
    b.add_row({{v.state[k + 1], 1.0}, {dk, -c}}, RowSense::kGreaterEqual, p.soc_min, name(p.id, "soc_robust", k));
  }
  if (view.t_start + h == view.total_steps) {
    b.set_bounds(v.state[h], p.soc_init, p.soc_init);
  } else {
    b.add_row({{v.state[h], 1.0}}, RowSense::kGreaterEqual, p.soc_init, name(p.id, "soc_terminal", h));
  }
}

}  // namespace

Mpo build_mpo(const CmaSpec& spec, const HorizonView& view, const ObjectiveWeights& weights, std::size_t agent) {
  require(agent < view.fixed_load.size() && agent < view.states.size(), ErrorKind::kDimension,
          "agent index outside the horizon view");
  require(view.states[agent].size() == spec.devices.size(), ErrorKind::kDimension,
          "one initial state per device required");
  const int h = view.length;
  Mpo mpo;
  mpo.fixed_load = view.fixed_load[agent];
  require(static_cast<int>(mpo.fixed_load.size()) == h, ErrorKind::kDimension, "fixed load window must span the horizon");
  const bool has_load = std::any_of(mpo.fixed_load.begin(), mpo.fixed_load.end(), [](double x) { return x != 0.0; });
  if (spec.devices.empty() && !has_load)
    fail(ErrorKind::kPrecondition, "agent '" + spec.id + "' has neither devices nor fixed load");

  QpBuilder b;
  MixedIntegerQp& m = mpo.miqp;
  std::vector<std::vector<Term>> util(h);

  for (std::size_t d = 0; d < spec.devices.size(); ++d) {
    const Device& dev = spec.devices[d];
    const double s0 = view.states[agent][d].value;
    DeviceVars v;
    v.kind = device_kind(dev);
    std::vector<Interval> limits(h);
    for (int k = 0; k < h; ++k)
      limits[k] = feasible_power_interval(dev, view.step(k), view.irradiance_frac[k], view.steps_per_day);

    switch (v.kind) {
      case DeviceKind::kBattery: {
        const auto& p = std::get<BatteryParams>(dev);
        add_storage(b, m, v, p, s0, limits, spec, view);
        break;
      }
      case DeviceKind::kEv: {
        const auto& p = std::get<EvParams>(dev);
        add_storage(b, m, v, p.battery, s0, limits, spec, view);
        for (int k = 1; k <= h; ++k)
          if (view.step(k) % view.steps_per_day == p.target_step % view.steps_per_day)
            b.add_squared({{v.state[k], 1.0}}, -p.soc_target, weights.xi_ev);
        break;
      }
      case DeviceKind::kHeatPump: {
        const auto& p = std::get<HpParams>(dev);
        const double theta = p.theta(view.dt_hours);
        const double gain = (1.0 - theta) * p.rho();
        for (int k = 0; k <= h; ++k) {
          if (k == 0) v.state.push_back(b.add_variable(s0, s0, name(p.id, "t_in", k)));
          else v.state.push_back(b.add_variable(p.t_min, p.t_max, name(p.id, "t_in", k)));
        }
        for (int k = 0; k < h; ++k) {
          const HpMode mode = hp_mode(view.outdoor_temp[k], p.t_setpoint);
          const double sign = mode == HpMode::kCooling ? 1.0 : -1.0;
          v.modes.push_back(mode);
          const Index pk = b.add_variable(-kInf, kInf, name(p.id, "p", k));
          const Index dk = b.add_variable(-kInf, kInf, name(p.id, "delta", k));
          v.power.push_back(pk);
          v.flex.push_back(dk);
          b.add_row({{dk, 1.0}, {pk, spec.eps_lo}}, RowSense::kGreaterEqual, 0.0, name(p.id, "flex_min", k));
          b.add_row({{dk, 1.0}, {pk, spec.eps_hi}}, RowSense::kLessEqual, 0.0, name(p.id, "flex_max", k));
          b.add_row({{pk, 1.0}, {dk, -1.0}}, RowSense::kGreaterEqual, -p.p_rated, name(p.id, "env_lo", k));
          b.add_row({{pk, 1.0}, {dk, 1.0}}, RowSense::kLessEqual, 0.0, name(p.id, "env_hi", k));
          b.add_row({{v.state[k + 1], 1.0}, {v.state[k], -theta}, {pk, -sign * gain}}, RowSense::kEqual,
                    (1.0 - theta) * view.outdoor_temp[k], name(p.id, "t_dyn", k));
          // Upward deviation warms the room while cooling and cools it while heating.
          if (mode == HpMode::kCooling)
            b.add_row({{v.state[k + 1], 1.0}, {dk, gain}}, RowSense::kLessEqual, p.t_max, name(p.id, "t_robust", k));
          else
            b.add_row({{v.state[k + 1], 1.0}, {dk, -gain}}, RowSense::kGreaterEqual, p.t_min,
                      name(p.id, "t_robust", k));
        }
        for (int k = 1; k <= h; ++k) b.add_squared({{v.state[k], 1.0}}, -p.t_setpoint, weights.xi_ac);
        break;
      }
      case DeviceKind::kPv: {
        const auto& p = std::get<PvParams>(dev);
        for (int k = 0; k < h; ++k) {
          const double cap = limits[k].hi;
          const Index pk = cap == 0.0 ? b.add_variable(0.0, 0.0, name(p.id, "p", k))
                                      : b.add_variable(-kInf, kInf, name(p.id, "p", k));
          const Index dk = b.add_variable(-kInf, kInf, name(p.id, "delta", k));
          v.power.push_back(pk);
          v.flex.push_back(dk);
          b.add_row({{dk, 1.0}, {pk, -spec.eps_lo}}, RowSense::kGreaterEqual, 0.0, name(p.id, "flex_min", k));
          b.add_row({{dk, 1.0}, {pk, -spec.eps_hi}}, RowSense::kLessEqual, 0.0, name(p.id, "flex_max", k));
          b.add_row({{pk, 1.0}, {dk, -1.0}}, RowSense::kGreaterEqual, 0.0, name(p.id, "env_lo", k));
          b.add_row({{pk, 1.0}, {dk, 1.0}}, RowSense::kLessEqual, cap, name(p.id, "env_hi", k));
          b.add_squared({{pk, 1.0}}, -cap, weights.xi_pv);
        }
        break;
      }
    }
    if (v.kind == DeviceKind::kBattery || v.kind == DeviceKind::kEv)
      for (int k = 0; k + 1 < h; ++k) b.add_squared({{v.power[k + 1], 1.0}, {v.power[k], -1.0}}, 0.0, weights.alpha_cyc);
    if (v.kind != DeviceKind::kHeatPump)
      for (int k = 0; k < h; ++k) util[k].push_back({v.power[k], 1.0});
    for (int k = 0; k < h; ++k) {
      b.add_linear(v.flex[k], -1.0);
      b.add_linear(v.power[k], -1.0);
    }
    mpo.devices.push_back(std::move(v));
  }
  for (int k = 0; k < h; ++k) {
    if (!util[k].empty()) b.add_squared(util[k], 0.0, weights.utilization);
    b.add_constant(mpo.fixed_load[k]);
  }
  m.base = b.build();
  return mpo;
}

MiqpSettings miqp_settings(const SolverConfig& cfg) {
  MiqpSettings s;
  s.qp.tol = cfg.tol;
  s.qp.max_iter = cfg.max_iter;
  s.node_limit = cfg.node_limit;
  s.local_search_passes = cfg.local_search_passes;
  s.gap_tol = cfg.gap_tol;
  return s;
}

FlexibilityOffer solve_flexibility(const CmaSpec& spec, const HorizonView& view, const ObjectiveWeights& weights,
                                   const SolverConfig& cfg, std::size_t agent) {
  const Mpo mpo = build_mpo(spec, view, weights, agent);
  const MiqpResult r = solve_miqp(mpo.miqp, miqp_settings(cfg));
  if (r.status == MiqpStatus::kInfeasible) {
    std::string what = "flexibility problem of agent '" + spec.id + "' is infeasible";
    if (!r.solution.note.empty()) what += " (" + r.solution.note + ")";
    fail(ErrorKind::kInfeasible, what);
  }
  const int h = view.length;
  const Eigen::VectorXd& x = r.solution.x;
  FlexibilityOffer offer;
  offer.objective = r.solution.objective;
  offer.status = r.status;
  offer.gap = r.gap;
  offer.nodes = r.nodes;
  offer.total.assign(h, 0.0);
  for (int k = 0; k < h; ++k) offer.total[k] = -mpo.fixed_load[k];
  double flex0 = 0.0;
  for (std::size_t d = 0; d < spec.devices.size(); ++d) {
    const DeviceVars& v = mpo.devices[d];
    DevicePlan plan;
    plan.id = device_id(spec.devices[d]);
    plan.kind = v.kind;
    plan.modes = v.modes;
    for (int k = 0; k < h; ++k) {
      plan.power.push_back(x[v.power[k]]);
      const double delta = x[v.flex[k]];
      plan.flex.push_back(delta < 1e-9 ? 0.0 : delta);
      offer.total[k] += plan.power.back();
    }
    for (Index s : v.state) plan.states.push_back(x[s]);
    flex0 += plan.flex[0];
    offer.devices.push_back(std::move(plan));
  }
  offer.p0 = offer.total[0];
  offer.p_lo = offer.p0 - flex0;
  offer.p_hi = offer.p0 + flex0;
  return offer;
}

Bid best_response(double gamma, double p0, double p_hi, double mu, double mu_tilde) {
  require(gamma > 0.0, ErrorKind::kPrecondition, "gamma must be positive");
  require(p_hi >= p0, ErrorKind::kPrecondition, "p_hi must not be below p0");
  const double s = mu + mu_tilde;
  require(s >= 0.0, ErrorKind::kPrecondition, "mu + mu_tilde must be nonnegative");
  if (2.0 * gamma * (p_hi - p0) < s) return {p_hi};
  return {p0 + s / (2.0 * gamma)};
}

double cma_welfare(double gamma, double p0, double p, double mu, double mu_tilde) {
  const double dp = p - p0;
  return mu_tilde * dp + mu * p - gamma * dp * dp;
}

std::vector<DeviceSettlement> settle_devices(const CmaSpec& spec, const FlexibilityOffer& offer,
                                             const std::vector<DeviceState>& states, double bid, double t_out,
                                             double dt_hours) {
  require(offer.devices.size() == spec.devices.size() && states.size() == spec.devices.size(), ErrorKind::kDimension,
          "offer, states and devices must align");
  double flex0 = 0.0;
  for (const DevicePlan& plan : offer.devices) flex0 += plan.flex[0];
  const double deviation = bid - offer.p0;
  std::vector<DeviceSettlement> out;
  for (std::size_t d = 0; d < spec.devices.size(); ++d) {
    const DevicePlan& plan = offer.devices[d];
    DeviceSettlement s;
    s.before = states[d];
    s.after = states[d];
    s.power = plan.power[0];
    if (flex0 > 0.0 && plan.flex[0] > 0.0) s.power += deviation * plan.flex[0] / flex0;
    const Device& dev = spec.devices[d];
    switch (device_kind(dev)) {
      case DeviceKind::kBattery:
        s.after.value = battery_soc_step(std::get<BatteryParams>(dev), s.before.value, s.power, dt_hours);
        break;
      case DeviceKind::kEv:
        s.after.value = battery_soc_step(std::get<EvParams>(dev), s.before.value, s.power, dt_hours);
        break;
      case DeviceKind::kHeatPump:
        s.power = std::min(s.power, 0.0);
        s.mode = plan.modes[0];
        s.after.value =
            hp_temperature_step(std::get<HpParams>(dev), s.before.value, t_out, s.power, dt_hours, s.mode);
        break;
      case DeviceKind::kPv: break;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace flexmarket
