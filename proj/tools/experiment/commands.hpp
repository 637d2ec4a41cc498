#pragma once

#include <filesystem>
#include <ostream>

#include "config.hpp"

namespace mflqr::experiment {

struct CommandOptions {
  std::filesystem::path out_dir = "out";
  bool quiet = false;
  std::ostream* log = nullptr;  ///< progress lines; nullptr or quiet silences
};

/// Runs the configured algorithm (pi, pd or pdmf; compare is forwarded to
/// cmd_compare) and writes trace.csv, result.json and summary.txt. Returns
/// the process exit code; library failures are reported in the artifacts.
int cmd_run(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Identification baseline against learning on the same first data
/// collection. Writes compare.csv, result.json and summary.txt.
int cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opts);

/// Assumption report: weights, stabilizing gains, ensemble rank conditions.
/// Always returns 0; findings are in result.json and summary.txt.
int cmd_check(const ExperimentConfig& cfg, const CommandOptions& opts);

}  // namespace mflqr::experiment
