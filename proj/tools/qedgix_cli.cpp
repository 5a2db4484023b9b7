#include <CLI11.hpp>
#include <optional>

#include "qedgix/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-UAV AoI simulator and MARL trainer"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "train every seed of an experiment config");
  train->add_option("--config", config, "experiment config (JSON)")->required();
  train->add_option("--seed", seed, "train only this seed");

  std::string checkpoint, scenario, out;
  std::size_t episodes = 20;
  std::uint64_t eval_seed = 7;
  auto* eval = app.add_subcommand("eval", "greedy rollouts of a saved policy");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--scenario", scenario, "scenario file (JSON)")->required();
  eval->add_option("--episodes", episodes, "number of episodes")->required();
  eval->add_option("--seed", eval_seed, "layout seed");
  eval->add_option("--out", out, "output directory (default: <checkpoint dir>/eval)");

  std::string sweep;
  bool resume = false;
  std::size_t jobs = 1;
  auto* sw = app.add_subcommand("sweep", "train and evaluate a grid of cells");
  sw->add_option("--config", config, "base experiment config (JSON)")->required();
  sw->add_option("--sweep", sweep, "sweep spec (JSON)")->required();
  sw->add_flag("--resume", resume, "skip cells already in sweep_results.csv");
  sw->add_option("--jobs", jobs, "cells trained in parallel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qedgix::cli::kConfigError;
  }

  if (*train) return qedgix::cli::cmd_train(config, seed);
  if (*eval)
    return qedgix::cli::cmd_eval(checkpoint, scenario, episodes, eval_seed,
                                 out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out));
  return qedgix::cli::cmd_sweep(config, sweep, resume, jobs);
}
