#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

namespace qedgix::cli {

enum ExitCode : int { kOk = 0, kAllCellsFailed = 1, kConfigError = 2, kIoError = 3, kShapeMismatch = 4 };

/// Trains every seed of the config (or only `seed` when given).
int cmd_train(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed = std::nullopt);

/// Greedy rollouts of a saved policy. Writes trajectories/episode_<i>.csv and
/// summary.json under `output_dir` (default: <checkpoint dir>/eval).
int cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& scenario_path,
             std::size_t episodes, std::uint64_t seed = 7,
             std::optional<std::filesystem::path> output_dir = std::nullopt);

/// Trains and evaluates each (cell, algorithm, seed). Rows go to
/// <output_dir>/sweep_results.csv, failures to sweep_failures.csv and the
/// per-cell mean/std to sweep_summary.csv.
int cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& sweep_path, bool resume,
              std::size_t jobs = 1);

}  // namespace qedgix::cli
