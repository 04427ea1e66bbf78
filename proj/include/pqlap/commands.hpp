#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace pqlap {

enum ExitCode : int {
  exit_ok = 0,
  exit_parse = 1,
  exit_precondition = 2,
  exit_solve = 3,
  exit_certification = 4,
};

struct CommandOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;  // overrides estimates.seed
  std::string report_path;            // verify only; defaults to <out>/report.json
  std::ostream* log = nullptr;        // progress and error lines; nullptr silences them
};

/// Writes <out>/estimates.json.
int cmd_estimate(const CommandOptions& opts);

/// Writes estimates.json, report.json, solution_L<n>.csv and diagnostics.csv.
int cmd_solve(const CommandOptions& opts);

/// Reloads the solutions named in the report, recomputes every table and
/// appends the certificates to the report.
int cmd_verify(const CommandOptions& opts);

}  // namespace pqlap
