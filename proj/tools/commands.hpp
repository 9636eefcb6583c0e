#pragma once

// Subcommand implementations for the rdelab tool. Commands are pure: they
// return the report and any CSV files as strings, and main() decides where
// they go.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rdelab/json_io.hpp"

namespace rdelab::cli {

/// Documented caps on config values; exceeding one is a validation error.
inline constexpr int kMaxDepth = 64;
inline constexpr std::int64_t kMaxReps = 100'000'000;
inline constexpr int kMaxSteps = 10'000;
inline constexpr int kMaxMomentOrder = 64;
inline constexpr int kMaxGrid = 1'000'000;
inline constexpr std::int64_t kMaxSampleSize = 10'000'000;

struct RunConfig {
  Json config = Json::object();
  std::optional<std::uint64_t> seed;  ///< --seed, overrides config "seed"
  std::optional<double> tol;          ///< --tol, overrides config "tol"
  bool has_out_dir = false;           ///< CSV side outputs are produced only with --out
};

struct CommandOutput {
  Json report;
  std::vector<std::pair<std::string, std::string>> files;  ///< name, contents
};

/// Reads and parses a JSON config file; throws ValidationError.
Json load_config(const std::string& path);

/// FNV-1a 64 of the canonical dump of the effective config, as 16 hex digits.
std::string config_hash(const Json& effective);

CommandOutput cmd_analyze(const RunConfig& rc);
CommandOutput cmd_simulate(const RunConfig& rc);
CommandOutput cmd_iterate(const RunConfig& rc);
CommandOutput cmd_transform(const RunConfig& rc);
CommandOutput cmd_cycles(const RunConfig& rc);

/// Shortest round-trip decimal form; "inf", "-inf" or "nan" otherwise.
std::string format_double(double x);

}  // namespace rdelab::cli
