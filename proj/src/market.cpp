#include "flexmarket/market.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace flexmarket {

double ClearingResult::total_bid() const {
  double total = 0.0;
  for (const Bid& b : bids) total += b.p_star;
  return total;
}

ClearingResult clear_market(const AggregateFlex& agg, double p_tilde, double pi) {
  ClearingResult cr;
  cr.pi = pi;
  cr.agg = agg;
  cr.p_requested = p_tilde;
  cr.p_tilde = p_tilde;
  cr.prices = compute_prices(agg, p_tilde, pi);
  for (const MemberFlex& m : agg.members) {
    const Bid bid = cr.prices.degenerate ? Bid{m.p0} : best_response(m.gamma, m.p0, m.p_hi, cr.prices.mu, cr.prices.mu_tilde);
    cr.bids.push_back(bid);
    cr.flex_payment.push_back(cr.prices.mu_tilde * (bid.p_star - m.p0));
    cr.energy_payment.push_back(cr.prices.mu * bid.p_star);
  }
  const double total = cr.total_bid();
  cr.lem_settlement = pi * total;
  cr.budget_residual = budget_residual(cr.prices, cr.bids, agg, pi);
  cr.tracking_error = std::abs(total - p_tilde);
  return cr;
}

ClearingResult clear_market(const std::vector<FlexibilityOffer>& offers, const std::vector<double>& gammas,
                            double p_tilde, double pi) {
  return clear_market(aggregate_offers(offers, gammas), p_tilde, pi);
}

namespace {

std::string step_message(int t, const std::string& what) { return "step " + std::to_string(t) + ": " + what; }

}  // namespace

SimulationTrace run_simulation(const Scenario& s) {
  validate_scenario(s);
  SimulationTrace trace;
  std::vector<std::vector<DeviceState>> states = initial_states(s);
  // Types are reported once and held for the whole day.
  std::vector<double> gammas;
  for (const CmaSpec& a : s.agents) gammas.push_back(a.gamma);

  int clipped = 0, infeasible_clip = 0, node_limited = 0;
  double worst_gap = 0.0;
  for (int t = 0; t < s.time.total_steps; ++t) {
    try {
      const HorizonView view = slice_horizon(s, t, states);
      std::vector<FlexibilityOffer> offers;
      for (std::size_t i = 0; i < s.agents.size(); ++i) {
        offers.push_back(solve_flexibility(s.agents[i], view, s.weights, s.solver, i));
        if (offers.back().status == MiqpStatus::kNodeLimit) ++node_limited;
        worst_gap = std::max(worst_gap, offers.back().gap);
      }
      const AggregateFlex agg = aggregate_offers(offers, gammas);
      const double pi = s.series.lem_price[t];
      const double requested = agg.p0_t + s.policy.beta[t] * (agg.p_hi_t - agg.p0_t);
      const ClipResult clip =
          clip_request(agg, pi, requested, s.policy.clip_to_positivity, s.policy.clip_to_no_saturation);
      ClearingResult cr = clear_market(agg, clip.p_tilde, pi);
      cr.step = t;
      cr.p_requested = requested;
      cr.clipped = clip.clipped;
      clipped += clip.clipped;
      infeasible_clip += !clip.feasible;

      const double t_out = s.series.outdoor_temp[t];
      for (std::size_t i = 0; i < s.agents.size(); ++i) {
        const CmaSpec& spec = s.agents[i];
        const FlexibilityOffer& o = offers[i];
        const double bid = cr.bids[i].p_star;
        trace.agents.push_back({t, spec.id, gammas[i], o.p0, o.p_lo, o.p_hi, bid, cr.flex_payment[i],
                                cr.energy_payment[i],
                                cma_welfare(gammas[i], o.p0, bid, cr.prices.mu, cr.prices.mu_tilde), o.objective,
                                o.gap, o.nodes, to_string(o.status)});
        const std::vector<DeviceSettlement> settled =
            settle_devices(spec, o, states[i], bid, t_out, s.time.dt_hours);
        for (std::size_t d = 0; d < settled.size(); ++d) {
          const DevicePlan& plan = o.devices[d];
          trace.devices.push_back({t, spec.id, plan.id, plan.kind, plan.power[0], plan.flex[0], settled[d].power,
                                   settled[d].before.value, settled[d].after.value, t_out, settled[d].mode});
          states[i][d] = settled[d].after;
        }
      }
      trace.clearings.push_back(std::move(cr));
    } catch (const Error& e) {
      throw Error(e.kind(), step_message(t, e.what()), e.diagnostics());
    }
  }

  nlohmann::json& m = trace.metadata;
  m["scenario"] = s.name;
  m["total_steps"] = s.time.total_steps;
  m["horizon_len"] = s.time.horizon_len;
  m["dt_hours"] = s.time.dt_hours;
  m["temperature_unit"] = s.temperature_unit;
  m["agents"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.agents.size(); ++i) m["agents"].push_back({{"id", s.agents[i].id}, {"gamma", gammas[i]}});
  m["weights"] = {{"alpha_cyc", s.weights.alpha_cyc},
                  {"xi_ev", s.weights.xi_ev},
                  {"xi_ac", s.weights.xi_ac},
                  {"xi_pv", s.weights.xi_pv},
                  {"utilization", s.weights.utilization}};
  m["solver"] = {{"tol", s.solver.tol},
                 {"max_iter", s.solver.max_iter},
                 {"node_limit", s.solver.node_limit},
                 {"local_search_passes", s.solver.local_search_passes},
                 {"gap_tol", s.solver.gap_tol}};
  m["policy"] = {{"clip_to_positivity", s.policy.clip_to_positivity},
                 {"clip_to_no_saturation", s.policy.clip_to_no_saturation},
                 {"clipped_clearings", clipped},
                 {"unclippable_clearings", infeasible_clip}};
  m["mpo"] = {{"node_limited_solves", node_limited}, {"worst_relative_gap", worst_gap}};
  m["notes"] = {
      "deterministic: single-threaded, no random seeds; identical inputs give identical traces",
      "receding horizon: offers are re-solved every clearing from the settled device states",
      "settled deviation from P0 is split across devices in proportion to first-step flexibility",
      "heat pump mode per step is fixed from forecast outdoor temperature against the setpoint",
      "EV away window and SOC target repeat daily; the target term is dropped when no horizon state hits it",
      "SOC(end) = SOC(init) only on horizons ending at the simulation end; otherwise end SOC >= initial SOC",
      "a request equal to the aggregate baseline closes the flexibility market (mu = pi, mu_tilde = 0, bids = P0)"};
  return trace;
}

EquilibriumReport verify_equilibrium(const ClearingResult& cr, int grid_points, double tol) {
  require(grid_points >= 100, ErrorKind::kPrecondition, "grid_points must be at least 100");
  require(cr.bids.size() == cr.agg.members.size(), ErrorKind::kDimension, "one bid per member required");
  EquilibriumReport rep;
  rep.nash_ok = true;
  const double mu = cr.prices.mu, mt = cr.prices.mu_tilde;
  for (std::size_t i = 0; i < cr.bids.size(); ++i) {
    const MemberFlex& m = cr.agg.members[i];
    const double bid = cr.bids[i].p_star;
    const double hi = cr.prices.degenerate ? m.p0 : m.p_hi;
    const double own = cma_welfare(m.gamma, m.p0, bid, mu, mt);
    double best = -kInf;
    const double h = (hi - m.p0) / (grid_points - 1);
    for (int g = 0; g < grid_points; ++g) {
      const double p = g + 1 == grid_points ? hi : m.p0 + g * h;
      best = std::max(best, cma_welfare(m.gamma, m.p0, p, mu, mt));
    }
    const double slack = m.gamma * h * h;
    rep.grid_slack = std::max(rep.grid_slack, slack);
    const double improvement = best - own;
    rep.improvement.push_back(improvement);
    const bool inside = bid >= m.p0 - 1e-12 * std::max(1.0, std::abs(m.p0)) &&
                        bid <= hi + 1e-12 * std::max(1.0, std::abs(hi));
    if (!inside || improvement > tol + slack) rep.nash_ok = false;
  }
  rep.cmo_utility = cmo_utility(cr.bids, cr.p_tilde);
  rep.stackelberg_ok = rep.cmo_utility >= -tol;
  rep.budget_residual = budget_residual(cr.prices, cr.bids, cr.agg, cr.pi);
  rep.pass = rep.nash_ok && rep.stackelberg_ok;
  return rep;
}

EquilibriumReport verify_equilibrium(const ClearingResult& cr, const std::vector<FlexibilityOffer>& offers,
                                     const std::vector<double>& gammas, int grid_points, double tol) {
  ClearingResult copy = cr;
  copy.agg = aggregate_offers(offers, gammas);
  return verify_equilibrium(copy, grid_points, tol);
}

// ---------------------------------------------------------------------------
// Trace files

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::kFileMissing, "cannot write " + p.string());
  out.precision(17);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rows of a CSV file keyed by header name.
class Table {
 public:
  explicit Table(const fs::path& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kFileMissing, "trace file not found: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw Error(ErrorKind::kParse, "trace file is empty: " + path.string());
    header_ = split(line);
    for (std::size_t i = 0; i < header_.size(); ++i) column_[header_[i]] = i;
    int n = 1;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      rows_.push_back(split(line));
      if (rows_.back().size() != header_.size())
        throw Error(ErrorKind::kParse, "wrong column count at " + path.string() + ":" + std::to_string(n));
    }
  }

  std::size_t size() const { return rows_.size(); }

  const std::string& text(std::size_t r, const std::string& col) const {
    auto it = column_.find(col);
    if (it == column_.end()) throw Error(ErrorKind::kParse, "missing column '" + col + "' in " + path_.string());
    return rows_[r][it->second];
  }

  double number(std::size_t r, const std::string& col) const {
    const std::string& s = text(r, col);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kParse, "bad number '" + s + "' in column '" + col + "' of " + path_.string() +
                                         " row " + std::to_string(r + 1));
    }
  }

  int integer(std::size_t r, const std::string& col) const { return static_cast<int>(std::lround(number(r, col))); }
  bool flag(std::size_t r, const std::string& col) const { return number(r, col) != 0.0; }

 private:
  fs::path path_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> column_;
  std::vector<std::vector<std::string>> rows_;
};

DeviceKind parse_kind(const std::string& s) {
  for (DeviceKind k : {DeviceKind::kBattery, DeviceKind::kEv, DeviceKind::kHeatPump, DeviceKind::kPv})
    if (s == to_string(k)) return k;
  throw Error(ErrorKind::kParse, "unknown device kind '" + s + "'");
}

}  // namespace

void write_trace(const SimulationTrace& trace, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out = open_out(dir / "clearings.csv");
    out << "step,pi,p0_t,p_lo_t,p_hi_t,gamma_t,p_requested,p_tilde,clipped,mu,mu_tilde,positivity_ok,saturation_ok,"
           "degenerate,p_total,lem_settlement,budget_residual,tracking_error\n";
    for (const ClearingResult& c : trace.clearings)
      out << c.step << "," << c.pi << "," << c.agg.p0_t << "," << c.agg.p_lo_t << "," << c.agg.p_hi_t << ","
          << c.agg.gamma_t << "," << c.p_requested << "," << c.p_tilde << "," << c.clipped << "," << c.prices.mu << ","
          << c.prices.mu_tilde << "," << c.prices.positivity_ok << "," << c.prices.saturation_ok << ","
          << c.prices.degenerate << "," << c.total_bid() << "," << c.lem_settlement << "," << c.budget_residual << ","
          << c.tracking_error << "\n";
  }
  {
    std::ofstream out = open_out(dir / "agents.csv");
    out << "step,agent,gamma,p0,p_lo,p_hi,bid,flex_payment,energy_payment,welfare,mpo_objective,mpo_gap,mpo_nodes,"
           "mpo_status\n";
    for (const AgentRecord& a : trace.agents)
      out << a.step << "," << a.agent << "," << a.gamma << "," << a.p0 << "," << a.p_lo << "," << a.p_hi << ","
          << a.bid << "," << a.flex_payment << "," << a.energy_payment << "," << a.welfare << "," << a.mpo_objective
          << "," << a.mpo_gap << "," << a.mpo_nodes << "," << a.mpo_status << "\n";
  }
  {
    std::ofstream out = open_out(dir / "devices.csv");
    out << "step,agent,device,kind,planned_power,flex,settled_power,state_before,state_after,t_out,mode\n";
    for (const DeviceRecord& d : trace.devices)
      out << d.step << "," << d.agent << "," << d.device << "," << to_string(d.kind) << "," << d.planned_power << ","
          << d.flex << "," << d.settled_power << "," << d.state_before << "," << d.state_after << "," << d.t_out << ","
          << (d.kind == DeviceKind::kHeatPump ? to_string(d.mode) : "") << "\n";
  }
  std::ofstream out = open_out(dir / "metadata.json");
  out << trace.metadata.dump(2) << "\n";
}

SimulationTrace read_trace(const fs::path& dir) {
  SimulationTrace trace;
  const Table clearings(dir / "clearings.csv");
  const Table agents(dir / "agents.csv");
  const Table devices(dir / "devices.csv");
  std::map<int, std::size_t> by_step;
  for (std::size_t r = 0; r < clearings.size(); ++r) {
    ClearingResult c;
    c.step = clearings.integer(r, "step");
    c.pi = clearings.number(r, "pi");
    c.agg.p0_t = clearings.number(r, "p0_t");
    c.agg.p_lo_t = clearings.number(r, "p_lo_t");
    c.agg.p_hi_t = clearings.number(r, "p_hi_t");
    c.agg.gamma_t = clearings.number(r, "gamma_t");
    c.p_requested = clearings.number(r, "p_requested");
    c.p_tilde = clearings.number(r, "p_tilde");
    c.clipped = clearings.flag(r, "clipped");
    c.prices.mu = clearings.number(r, "mu");
    c.prices.mu_tilde = clearings.number(r, "mu_tilde");
    c.prices.positivity_ok = clearings.flag(r, "positivity_ok");
    c.prices.saturation_ok = clearings.flag(r, "saturation_ok");
    c.prices.degenerate = clearings.flag(r, "degenerate");
    c.lem_settlement = clearings.number(r, "lem_settlement");
    c.budget_residual = clearings.number(r, "budget_residual");
    c.tracking_error = clearings.number(r, "tracking_error");
    by_step[c.step] = trace.clearings.size();
    trace.clearings.push_back(std::move(c));
  }
  for (std::size_t r = 0; r < agents.size(); ++r) {
    AgentRecord a;
    a.step = agents.integer(r, "step");
    a.agent = agents.text(r, "agent");
    a.gamma = agents.number(r, "gamma");
    a.p0 = agents.number(r, "p0");
    a.p_lo = agents.number(r, "p_lo");
    a.p_hi = agents.number(r, "p_hi");
    a.bid = agents.number(r, "bid");
    a.flex_payment = agents.number(r, "flex_payment");
    a.energy_payment = agents.number(r, "energy_payment");
    a.welfare = agents.number(r, "welfare");
    a.mpo_objective = agents.number(r, "mpo_objective");
    a.mpo_gap = agents.number(r, "mpo_gap");
    a.mpo_nodes = agents.integer(r, "mpo_nodes");
    a.mpo_status = agents.text(r, "mpo_status");
    auto it = by_step.find(a.step);
    if (it == by_step.end())
      throw Error(ErrorKind::kParse, "agent row refers to unknown step " + std::to_string(a.step));
    ClearingResult& c = trace.clearings[it->second];
    c.agg.members.push_back({a.gamma, a.p0, a.p_hi});
    c.bids.push_back({a.bid});
    c.flex_payment.push_back(a.flex_payment);
    c.energy_payment.push_back(a.energy_payment);
    trace.agents.push_back(std::move(a));
  }
  for (std::size_t r = 0; r < devices.size(); ++r) {
    DeviceRecord d;
    d.step = devices.integer(r, "step");
    d.agent = devices.text(r, "agent");
    d.device = devices.text(r, "device");
    d.kind = parse_kind(devices.text(r, "kind"));
    d.planned_power = devices.number(r, "planned_power");
    d.flex = devices.number(r, "flex");
    d.settled_power = devices.number(r, "settled_power");
    d.state_before = devices.number(r, "state_before");
    d.state_after = devices.number(r, "state_after");
    d.t_out = devices.number(r, "t_out");
    d.mode = devices.text(r, "mode") == "heating" ? HpMode::kHeating : HpMode::kCooling;
    trace.devices.push_back(std::move(d));
  }
  std::ifstream meta(dir / "metadata.json");
  if (meta) {
    try {
      trace.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kParse, std::string("metadata.json: ") + e.what());
    }
  }
  return trace;
}

}  // namespace flexmarket
