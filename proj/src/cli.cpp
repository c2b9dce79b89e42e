#include "flexmarket/cli.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "CLI11.hpp"

namespace flexmarket {

namespace fs = std::filesystem;

Scenario load_with_overrides(const fs::path& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc = read_scenario_document(path);
  for (const std::string& o : overrides) apply_override(doc, o);
  return parse_scenario(doc, path.parent_path());
}

namespace {

void print_error(std::ostream& err, const Error& e) {
  fmt::print(err, "error: {}\n", e.what());
  for (const Diagnostic& d : e.diagnostics()) fmt::print(err, "  {}: {}\n", d.field, d.message);
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kFileMissing:
    case ErrorKind::kParse:
    case ErrorKind::kValidation: return kExitUsage;
    default: return kExitFailure;
  }
}

std::ofstream open_csv(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::kFileMissing, "cannot write " + p.string());
  out.precision(17);
  return out;
}

void print_summary(const SimulationTrace& trace, std::ostream& out) {
  fmt::print(out, "{:>4} {:>8} {:>9} {:>9} {:>10} {:>10} {:>10} {:>10}\n", "step", "pi", "mu", "mu_tilde", "P0_t",
             "P_tilde", "tracking", "residual");
  for (const ClearingResult& c : trace.clearings)
    fmt::print(out, "{:>4} {:>8.4f} {:>9.4f} {:>9.4f} {:>10.4f} {:>10.4f} {:>10.2e} {:>10.2e}{}\n", c.step, c.pi,
               c.prices.mu, c.prices.mu_tilde, c.agg.p0_t, c.p_tilde, c.tracking_error, c.budget_residual,
               c.clipped ? "  (clipped)" : "");
}

SimulationTrace trace_for(const RunConfig& cfg) {
  if (!cfg.trace.empty()) return read_trace(cfg.trace);
  if (cfg.scenario.empty()) throw Error(ErrorKind::kValidation, "either --trace or --scenario is required");
  return run_simulation(load_with_overrides(cfg.scenario, cfg.overrides));
}

}  // namespace

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Scenario s = load_with_overrides(cfg.scenario, cfg.overrides);
  const SimulationTrace trace = run_simulation(s);
  write_trace(trace, cfg.out);
  print_summary(trace, out);
  fmt::print(out, "wrote {} clearings to {}\n", trace.clearings.size(), cfg.out.string());
  return kExitOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const SimulationTrace trace = trace_for(cfg);
  if (trace.clearings.empty()) throw Error(ErrorKind::kParse, "trace contains no clearings");
  std::vector<int> failing;
  fmt::print(out, "{:>4} {:>12} {:>12} {:>12} {:>6} {:>6}\n", "step", "improvement", "cmo_utility", "residual", "nash",
             "stack");
  for (const ClearingResult& c : trace.clearings) {
    const EquilibriumReport r = verify_equilibrium(c, cfg.grid_points, cfg.tol);
    double worst = 0.0;
    for (double v : r.improvement) worst = std::max(worst, v);
    fmt::print(out, "{:>4} {:>12.3e} {:>12.3e} {:>12.3e} {:>6} {:>6}\n", c.step, worst, r.cmo_utility,
               r.budget_residual, r.nash_ok ? "ok" : "FAIL", r.stackelberg_ok ? "ok" : "FAIL");
    if (!r.pass) failing.push_back(c.step);
  }
  if (failing.empty()) {
    fmt::print(out, "all {} clearings pass\n", trace.clearings.size());
    return kExitOk;
  }
  fmt::print(err, "{} of {} clearings fail: steps {}\n", failing.size(), trace.clearings.size(),
             fmt::join(failing, ", "));
  return kExitFailure;
}

int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const SimulationTrace trace = trace_for(cfg);
  std::vector<std::string> agents;
  for (const AgentRecord& a : trace.agents)
    if (std::find(agents.begin(), agents.end(), a.agent) == agents.end()) agents.push_back(a.agent);
  if (cfg.agent.empty()) throw Error(ErrorKind::kValidation, "--agent is required");
  std::string tag = cfg.agent;
  if (std::find(agents.begin(), agents.end(), tag) == agents.end()) {
    // Fall back to a 1-based position in scenario order.
    const bool digits = std::all_of(tag.begin(), tag.end(), [](unsigned char c) { return std::isdigit(c); });
    const std::size_t pos = digits && tag.size() < 9 ? std::stoul(tag) : 0;
    if (pos < 1 || pos > agents.size()) throw Error(ErrorKind::kValidation, "unknown agent id '" + cfg.agent + "'");
    tag = agents[pos - 1];
  }
  fs::create_directories(cfg.out);

  {
    std::ofstream f = open_csv(cfg.out / "injections.csv");
    f << "step,p_tilde,p_total,p0_t,p_lo_t,p_hi_t\n";
    for (const ClearingResult& c : trace.clearings)
      f << c.step << "," << c.p_tilde << "," << c.total_bid() << "," << c.agg.p0_t << "," << c.agg.p_lo_t << ","
        << c.agg.p_hi_t << "\n";
  }
  {
    std::ofstream f = open_csv(cfg.out / "prices.csv");
    f << "step,pi,mu,mu_tilde\n";
    for (const ClearingResult& c : trace.clearings)
      f << c.step << "," << c.pi << "," << c.prices.mu << "," << c.prices.mu_tilde << "\n";
  }
  {
    std::ofstream f = open_csv(cfg.out / ("devices_" + tag + ".csv"));
    f << "step,device,kind,planned_power,flex,settled_power\n";
    for (const DeviceRecord& d : trace.devices)
      if (d.agent == tag)
        f << d.step << "," << d.device << "," << to_string(d.kind) << "," << d.planned_power << "," << d.flex << ","
          << d.settled_power << "\n";
  }
  {
    // State at the end of each step.
    std::ofstream f = open_csv(cfg.out / ("states_" + tag + ".csv"));
    f << "step,device,kind,soc,indoor_temp\n";
    for (const DeviceRecord& d : trace.devices) {
      if (d.agent != tag || d.kind == DeviceKind::kPv) continue;
      f << d.step << "," << d.device << "," << to_string(d.kind) << ",";
      if (d.kind == DeviceKind::kHeatPump) f << "," << d.state_after << "\n";
      else f << d.state_after << ",\n";
    }
  }
  fmt::print(out, "wrote injections.csv, prices.csv, devices_{0}.csv, states_{0}.csv to {1}\n", tag,
             cfg.out.string());
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Community flexibility market simulator"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--override", cfg.overrides, "Scenario override key=value (repeatable)");
  };
  CLI::App* run = app.add_subcommand("run", "Simulate a day and write the trace");
  run->add_option("--scenario", cfg.scenario, "Scenario JSON")->required();
  run->add_option("--out", cfg.out, "Output directory");
  add_common(run);

  CLI::App* verify = app.add_subcommand("verify", "Check equilibrium properties of every clearing");
  auto* vt = verify->add_option("--trace", cfg.trace, "Trace directory from a previous run");
  auto* vs = verify->add_option("--scenario", cfg.scenario, "Scenario JSON to simulate inline");
  vt->excludes(vs);
  verify->add_option("--grid-points", cfg.grid_points, "Grid points per agent")->check(CLI::Range(100, 100000000));
  verify->add_option("--tol", cfg.tol, "Welfare and tracking tolerance")->check(CLI::PositiveNumber);
  add_common(verify);

  CLI::App* report = app.add_subcommand("report", "Write plot-ready CSV tables");
  auto* rt = report->add_option("--trace", cfg.trace, "Trace directory from a previous run");
  auto* rs = report->add_option("--scenario", cfg.scenario, "Scenario JSON to simulate inline");
  rt->excludes(rs);
  report->add_option("--agent", cfg.agent, "Agent id (or 1-based index) for device and state tables")->required();
  report->add_option("--out", cfg.out, "Output directory");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(cfg, out, err);
    if (verify->parsed()) return cmd_verify(cfg, out, err);
    return cmd_report(cfg, out, err);
  } catch (const Error& e) {
    print_error(err, e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
}

}  // namespace flexmarket
