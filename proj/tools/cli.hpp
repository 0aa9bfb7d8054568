#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "taskcomm/gauss_seidel.hpp"

namespace taskcomm::cli {

enum ExitCode : int {
  kOk = 0,
  kVerifyMismatch = 1,
  kBadArguments = 2,
  kRuntimeFailure = 3,
  kWatchdog = 4,
};

inline constexpr const char* kPollingEnv = "TASKCOMM_POLLING_PERIOD_US";
inline constexpr int kMetricsSchema = 1;

struct RunConfig {
  gs::VariantConfig run;
  bool demo = false;  // --demo deadlock
  bool interop = true;
  std::chrono::milliseconds watchdog{5000};
  std::string hostfile;
  int rank = -1;  // tcp only
  std::string metrics_out;
  std::string trace_out;
  bool verify = false;
};

struct ParseResult {
  std::optional<RunConfig> config;  // empty when the process should exit
  int exit_code = kOk;
};

/// Parses and validates the command line. `--help` yields no config and
/// exit code 0; invalid input prints a message to `err` and yields exit code 2.
ParseResult parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Runs a parsed configuration and returns the process exit code.
int run_main(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Metrics record for a finished run (schema 1).
std::string metrics_json(const RunConfig& config, const gs::RunResult& result);

}  // namespace taskcomm::cli
