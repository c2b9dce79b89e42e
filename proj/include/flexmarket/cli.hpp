#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flexmarket/market.hpp"

namespace flexmarket {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

struct RunConfig {
  std::string command;  // run, verify or report
  std::filesystem::path scenario;
  std::filesystem::path out = "out";
  std::filesystem::path trace;
  std::vector<std::string> overrides;  // key=value, applied in order
  std::string agent;
  int grid_points = 10000;
  double tol = 1e-6;
};

/// Loads the scenario document, applies overrides and validates the result.
Scenario load_with_overrides(const std::filesystem::path& path, const std::vector<std::string>& overrides);

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_report(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches. Library errors map to exit codes: input,
/// validation and usage problems give 2, everything else 1.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flexmarket
