#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cbvf/config.hpp"

namespace cbvf {

/// Process exit codes of the `cbvf` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,           ///< I/O or unexpected internal error
  kExitInvalidConfig = 2,     ///< config, CLI usage, slice spec or grid mismatch
  kExitDiverged = 3,          ///< solver produced non-finite values
  kExitTheoremViolation = 4,  ///< compare: an excess exceeded its tolerance
  kExitMemoryLimit = 5,       ///< CBVF_MAX_GRID_BYTES exceeded
  kExitSimulationFailed = 6,  ///< closed-loop blow-up or infeasible filter in error mode
};

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Writes manifest.json into `out_dir` and returns it.
nlohmann::json write_manifest(const std::filesystem::path& out_dir, nlohmann::json manifest);

/// Build, sample the candidate (or l), solve, write fields, report and
/// manifest.
nlohmann::json cmd_solve(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct SimulateOutcome {
  nlohmann::json manifest;
  bool all_completed = true;  ///< false if any rollout blew up or hit an infeasible QP in error mode
};

/// One filtered closed-loop rollout per x0 on the field stored at `field_dir`.
SimulateOutcome cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& field_dir,
                             const std::filesystem::path& out_dir, std::uint64_t seed);

struct CompareOutcome {
  nlohmann::json manifest;
  nlohmann::json metrics;
  bool passed = true;
};

/// Vanilla (from l) and warm-started (from the candidate) solves checked
/// against each other at shared snapshot times.
CompareOutcome cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Format `csv-slice` or `json-contour`; writes `out_file` and returns it.
std::filesystem::path cmd_export(const std::filesystem::path& field_dir, std::string_view format,
                                 std::string_view slice, const std::filesystem::path& out_file);

/// Entry point of the command-line tool.
int run_cli(int argc, char** argv);

}  // namespace cbvf
