#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mflqr/simulator.hpp"

namespace mflqr::experiment {

inline constexpr int kSchemaVersion = 1;

enum class Algorithm { kPi, kPd, kPdmf, kCompare };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

/// Free initial inputs of the augmented ensemble: either listed per member
/// or drawn uniformly from [-amplitude, amplitude]^m with a seed.
struct InputSpec {
  bool uniform = true;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
  MatrixXd means;       ///< m x r when listed
  MatrixXd deviations;  ///< m x r when listed

  bool operator==(const InputSpec& o) const;
};

struct RunSpec {
  Algorithm algorithm = Algorithm::kPi;
  double eps = 1e-10;
  int max_iter = 500;
  int M = 100;
  int H = 30;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::kNormal;
  int repetitions = 1;
  bool exact_data = false;
  double divergence_threshold = 1e8;

  bool operator==(const RunSpec&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  SystemMatrices system;
  MatrixXd Q, Qbar, R, Rbar;
  MatrixXd F0, F0bar;
  MatrixXd means;       ///< n x r
  MatrixXd deviations;  ///< n x r
  std::optional<InputSpec> inputs;
  RunSpec run;
  std::string output;

  MfSystem make_system() const;
  WeightSpec make_weights() const;
  GainPair initial_gains() const;
  InitialStateEnsemble states() const;
  /// State ensemble with the configured inputs, or U[-1, 1]^m with seed 0.
  InitialStateEnsemble augmented() const;

  bool operator==(const ExperimentConfig& o) const;
};

/// Parses and validates a config document. Throws kParseError for malformed
/// JSON, kSchemaError for missing or mistyped fields and kInvariantError when
/// the system, weights, gains or ensemble violate their invariants.
ExperimentConfig parse_config_text(std::string_view text, const std::string& origin = "config");

/// Reads `path` (kIoError when unreadable) and parses it.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Array of row arrays.
nlohmann::json matrix_json(const MatrixXd& m);

nlohmann::json to_json(const ExperimentConfig& cfg);
std::string serialize(const ExperimentConfig& cfg);

/// Checks everything parse_config checks on an in-memory config.
void validate(const ExperimentConfig& cfg);

}  // namespace mflqr::experiment
