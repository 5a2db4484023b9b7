#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "qedgix/encoder/policy.hpp"
#include "qedgix/env/world.hpp"
#include "qedgix/mixer/mixer.hpp"
#include "qedgix/nn/checkpoint.hpp"
#include "qedgix/trainer/trainer.hpp"

namespace qedgix::cli {

enum class Algorithm { Qedgix, Qmix, AggGnn };

std::string to_string(Algorithm algorithm);
/// "qedgix", "qmix" or "agg-gnn"; throws ConfigError otherwise.
Algorithm parse_algorithm(const std::string& tag);
encoder::GraphVariant variant_for(Algorithm algorithm);

struct EvaluationSettings {
  std::size_t episodes = 20;
  std::size_t interval = 0;  // episodes between periodic evaluations, 0 = final only
  std::uint64_t seed = 7;
  friend bool operator==(const EvaluationSettings&, const EvaluationSettings&) = default;
};

struct ExperimentConfig {
  env::WorldConfig scenario;
  Algorithm algorithm = Algorithm::Qedgix;
  trainer::TrainConfig train;
  encoder::EncoderConfig encoder;
  mixer::MixerConfig mixer;
  EvaluationSettings evaluation;
  std::size_t checkpoint_interval = 0;  // 0 = final checkpoint only
  std::string output_dir = "runs";
  std::vector<std::uint64_t> seeds{1};

  /// Encoder config with the variant implied by `algorithm`.
  encoder::EncoderConfig encoder_for_algorithm() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment(const std::filesystem::path& path);

struct SweepCell {
  std::string label;  // value written to the swept_value column
  double detection_range_xi = 0.0;
  std::size_t num_uavs = 0;
  std::size_t num_users = 0;
};

enum class SweepKey { DetectionRange, Scale };

struct SweepSpec {
  SweepKey key = SweepKey::DetectionRange;
  std::vector<SweepCell> cells;
  std::size_t repetitions = 3;
  std::vector<Algorithm> algorithms;  // empty = the config's algorithm

  /// Config for one cell, validated against the physical bounds.
  ExperimentConfig apply(const ExperimentConfig& base, const SweepCell& cell, Algorithm algorithm) const;
};

/// {"key": "detection_range_xi", "values": [...]} or with
/// "range": {"start", "stop", "step"}; {"key": "num_uavs x num_users",
/// "uavs": [...], "users": [...]} or "values": [[m, n], ...]. Optional
/// "repetitions" and "algorithms".
SweepSpec sweep_from_json(const nlohmann::json& j);
SweepSpec load_sweep(const std::filesystem::path& path);

/// <output_dir>/<algorithm>_m<M>_n<N>_d<detection>_seed<seed>
std::filesystem::path run_directory(const ExperimentConfig& config, std::uint64_t seed);

/// Checkpoint of a trained policy and mixer with the metadata needed to
/// rebuild them.
nn::Checkpoint make_checkpoint(const ExperimentConfig& config, trainer::Learner& learner);

struct LoadedPolicy {
  Algorithm algorithm = Algorithm::Qedgix;
  encoder::PolicyNetwork policy;
  std::size_t num_uavs = 0;
  std::size_t num_users = 0;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rebuilds the policy stored in `checkpoint` for `scenario`; throws
/// ShapeMismatch if the checkpoint was trained for other dimensions.
LoadedPolicy policy_from_checkpoint(const nn::Checkpoint& checkpoint, const env::WorldConfig& scenario);

struct RunResult {
  std::filesystem::path directory;
  double mean_aoi = 0.0;
  double mean_return = 0.0;
};

/// Trains one seed, writes config.json, metrics.jsonl, checkpoints/,
/// evaluations.jsonl and the final greedy evaluation (summary.json and
/// trajectories/). Throws IoError when the run directory is not writable.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, bool quiet = false);

}  // namespace qedgix::cli
