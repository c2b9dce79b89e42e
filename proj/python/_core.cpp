#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flexmarket/cli.hpp"

namespace py = pybind11;
using namespace flexmarket;

namespace {

py::dict region_dict(const Region& r) {
  py::dict d;
  d["lo"] = r.lo;
  d["hi"] = r.hi;
  d["lo_open"] = r.lo_open;
  d["hi_open"] = r.hi_open;
  d["empty"] = r.empty();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Community flexibility market: device models, agent offers, operator pricing and simulation";

  static const py::handle error_type = py::exception<Error>(m, "FlexmarketError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = to_string(e.kind());
      py::list diags;
      for (const Diagnostic& d : e.diagnostics()) diags.append(py::make_tuple(d.field, d.message));
      exc.attr("diagnostics") = diags;
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::enum_<DeviceKind>(m, "DeviceKind")
      .value("battery", DeviceKind::kBattery)
      .value("ev", DeviceKind::kEv)
      .value("heat_pump", DeviceKind::kHeatPump)
      .value("pv", DeviceKind::kPv);

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_property_readonly("total_steps", [](const Scenario& s) { return s.time.total_steps; })
      .def_property_readonly("horizon_len", [](const Scenario& s) { return s.time.horizon_len; })
      .def_property_readonly("agent_ids",
                             [](const Scenario& s) {
                               std::vector<std::string> ids;
                               for (const CmaSpec& a : s.agents) ids.push_back(a.id);
                               return ids;
                             })
      .def("to_json", [](const Scenario& s) { return scenario_to_json(s).dump(); })
      .def("set_beta", [](Scenario& s, const std::vector<double>& beta) {
        require(beta.size() == s.policy.beta.size(), ErrorKind::kDimension, "one beta per clearing step required");
        s.policy.beta = beta;
      });

  m.def("load_scenario", &load_with_overrides, py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        "Load and validate a scenario JSON file; overrides are key=value strings.");
  m.def(
      "scenario_from_json",
      [](const std::string& text, const std::filesystem::path& base_dir) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
          throw Error(ErrorKind::kParse, e.what());
        }
        return parse_scenario(doc, base_dir);
      },
      py::arg("text"), py::arg("base_dir") = std::filesystem::path("."));

  py::class_<DevicePlan>(m, "DevicePlan")
      .def_readonly("id", &DevicePlan::id)
      .def_readonly("kind", &DevicePlan::kind)
      .def_readonly("power", &DevicePlan::power)
      .def_readonly("flex", &DevicePlan::flex)
      .def_readonly("states", &DevicePlan::states);

  py::class_<FlexibilityOffer>(m, "FlexibilityOffer")
      .def(py::init([](double p0, double p_lo, double p_hi) {
             require(p_lo <= p0 && p0 <= p_hi, ErrorKind::kPrecondition, "offer must satisfy p_lo <= p0 <= p_hi");
             FlexibilityOffer o;
             o.p0 = p0;
             o.p_lo = p_lo;
             o.p_hi = p_hi;
             return o;
           }),
           py::arg("p0"), py::arg("p_lo"), py::arg("p_hi"))
      .def_readonly("p0", &FlexibilityOffer::p0)
      .def_readonly("p_lo", &FlexibilityOffer::p_lo)
      .def_readonly("p_hi", &FlexibilityOffer::p_hi)
      .def_readonly("devices", &FlexibilityOffer::devices)
      .def_readonly("total", &FlexibilityOffer::total)
      .def_readonly("objective", &FlexibilityOffer::objective)
      .def_readonly("gap", &FlexibilityOffer::gap)
      .def_readonly("nodes", &FlexibilityOffer::nodes)
      .def_property_readonly("status", [](const FlexibilityOffer& o) { return std::string(to_string(o.status)); });

  m.def(
      "solve_flexibility",
      [](const Scenario& s, std::size_t agent, int t) {
        require(agent < s.agents.size(), ErrorKind::kPrecondition, "agent index out of range");
        return solve_flexibility(s.agents[agent], slice_horizon(s, t), s.weights, s.solver, agent);
      },
      py::arg("scenario"), py::arg("agent"), py::arg("t") = 0,
      "Stage-I offer of one agent for the horizon starting at step t, from initial device states.");

  m.def(
      "best_response",
      [](double gamma, double p0, double p_hi, double mu, double mu_tilde) {
        return best_response(gamma, p0, p_hi, mu, mu_tilde).p_star;
      },
      py::arg("gamma"), py::arg("p0"), py::arg("p_hi"), py::arg("mu"), py::arg("mu_tilde"));
  m.def("cma_welfare", &cma_welfare, py::arg("gamma"), py::arg("p0"), py::arg("p"), py::arg("mu"),
        py::arg("mu_tilde"));

  py::class_<MemberFlex>(m, "MemberFlex")
      .def_readonly("gamma", &MemberFlex::gamma)
      .def_readonly("p0", &MemberFlex::p0)
      .def_readonly("p_hi", &MemberFlex::p_hi);

  py::class_<AggregateFlex>(m, "AggregateFlex")
      .def_readonly("p0_t", &AggregateFlex::p0_t)
      .def_readonly("p_lo_t", &AggregateFlex::p_lo_t)
      .def_readonly("p_hi_t", &AggregateFlex::p_hi_t)
      .def_readonly("gamma_t", &AggregateFlex::gamma_t)
      .def_readonly("members", &AggregateFlex::members);

  py::class_<PriceSignal>(m, "PriceSignal")
      .def_readonly("mu", &PriceSignal::mu)
      .def_readonly("mu_tilde", &PriceSignal::mu_tilde)
      .def_readonly("positivity_ok", &PriceSignal::positivity_ok)
      .def_readonly("saturation_ok", &PriceSignal::saturation_ok)
      .def_readonly("degenerate", &PriceSignal::degenerate);

  m.def("aggregate_offers", &aggregate_offers, py::arg("offers"), py::arg("gammas"));
  m.def("compute_prices", &compute_prices, py::arg("agg"), py::arg("p_tilde"), py::arg("pi"));
  m.def(
      "positivity_region", [](const AggregateFlex& a, double pi) { return region_dict(positivity_region(a, pi)); },
      py::arg("agg"), py::arg("pi"));
  m.def("saturation_limit", &saturation_limit, py::arg("agg"));

  py::class_<ClearingResult>(m, "ClearingResult")
      .def_readonly("step", &ClearingResult::step)
      .def_readonly("pi", &ClearingResult::pi)
      .def_readonly("agg", &ClearingResult::agg)
      .def_readonly("p_requested", &ClearingResult::p_requested)
      .def_readonly("p_tilde", &ClearingResult::p_tilde)
      .def_readonly("clipped", &ClearingResult::clipped)
      .def_readonly("prices", &ClearingResult::prices)
      .def_property_readonly("bids",
                             [](const ClearingResult& c) {
                               std::vector<double> v;
                               for (const Bid& b : c.bids) v.push_back(b.p_star);
                               return v;
                             })
      .def_readonly("flex_payment", &ClearingResult::flex_payment)
      .def_readonly("energy_payment", &ClearingResult::energy_payment)
      .def_readonly("lem_settlement", &ClearingResult::lem_settlement)
      .def_readonly("budget_residual", &ClearingResult::budget_residual)
      .def_readonly("tracking_error", &ClearingResult::tracking_error)
      .def_property_readonly("total_bid", &ClearingResult::total_bid);

  m.def("clear_market", py::overload_cast<const AggregateFlex&, double, double>(&clear_market), py::arg("agg"),
        py::arg("p_tilde"), py::arg("pi"));

  py::class_<EquilibriumReport>(m, "EquilibriumReport")
      .def_readonly("improvement", &EquilibriumReport::improvement)
      .def_readonly("grid_slack", &EquilibriumReport::grid_slack)
      .def_readonly("cmo_utility", &EquilibriumReport::cmo_utility)
      .def_readonly("budget_residual", &EquilibriumReport::budget_residual)
      .def_readonly("nash_ok", &EquilibriumReport::nash_ok)
      .def_readonly("stackelberg_ok", &EquilibriumReport::stackelberg_ok)
      .def_readonly("passed", &EquilibriumReport::pass);

  m.def("verify_equilibrium", py::overload_cast<const ClearingResult&, int, double>(&verify_equilibrium),
        py::arg("clearing"), py::arg("grid_points") = 10000, py::arg("tol") = 1e-6);

  py::class_<DeviceRecord>(m, "DeviceRecord")
      .def_readonly("step", &DeviceRecord::step)
      .def_readonly("agent", &DeviceRecord::agent)
      .def_readonly("device", &DeviceRecord::device)
      .def_readonly("kind", &DeviceRecord::kind)
      .def_readonly("planned_power", &DeviceRecord::planned_power)
      .def_readonly("flex", &DeviceRecord::flex)
      .def_readonly("settled_power", &DeviceRecord::settled_power)
      .def_readonly("state_before", &DeviceRecord::state_before)
      .def_readonly("state_after", &DeviceRecord::state_after);

  py::class_<SimulationTrace>(m, "SimulationTrace")
      .def_readonly("clearings", &SimulationTrace::clearings)
      .def_readonly("devices", &SimulationTrace::devices)
      .def_property_readonly("metadata", [](const SimulationTrace& t) { return t.metadata.dump(); })
      .def("write", [](const SimulationTrace& t, const std::filesystem::path& dir) { write_trace(t, dir); },
           py::arg("dir"));

  m.def("run_simulation", &run_simulation, py::arg("scenario"), py::call_guard<py::gil_scoped_release>());
  m.def("read_trace", &read_trace, py::arg("dir"));
}
