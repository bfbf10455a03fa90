#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sdeabc/config.hpp"

namespace sdeabc {

// Command-line usage errors share the config-error code.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

struct RunReport {
  std::string summary;  // the one-line summary printed at the end
  std::vector<std::filesystem::path> outputs;
  double acceptance_rate = 0.0;
  double wall_seconds = 0.0;
};

/// Runs the pipeline selected by cfg.mode, writing every output under cfg.output_dir.
/// Progress lines go to `log`.
RunReport execute(const RunConfig& cfg, std::ostream& log);

/// Maps the exception currently being handled to an exit code and writes a
/// categorized message to `err`.
int report_exception(std::ostream& err);

/// load_config + execute with exception-to-exit-code mapping.
int run_command(const std::filesystem::path& config, const std::vector<std::string>& overrides,
                std::ostream& out, std::ostream& err);

/// Built-in oracle checks: kernel volumes, quantile round trips, particle filter
/// against the Kalman likelihood. One PASS/FAIL line per check; returns
/// kExitOk when all pass and kExitNumerical otherwise.
int verify_command(std::ostream& out, std::uint64_t seed = 1);

}  // namespace sdeabc
