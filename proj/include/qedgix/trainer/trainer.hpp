#pragma once

#include <functional>
#include <optional>
#include <span>

#include "qedgix/encoder/policy.hpp"
#include "qedgix/env/scenario_io.hpp"
#include "qedgix/mixer/mixer.hpp"
#include "qedgix/nn/adam.hpp"
#include "qedgix/trainer/replay.hpp"

namespace qedgix::trainer {

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t batch_size = 128;
  double gamma = 0.99;
  double epsilon = 0.05;
  std::size_t target_sync_period = 200;  // gradient steps
  std::size_t total_episodes = 2000;
  std::size_t warmup_episodes = 10;
  std::size_t train_steps_per_episode = 1;
  std::size_t buffer_capacity = 5000;
  /// Multiplier applied to environment rewards inside the TD target.
  /// 0 selects 1 / (num_users * horizon).
  double reward_scale = 0.0;
  double grad_clip_norm = 10.0;
  /// Draw a fresh user layout every episode instead of using the scenario's
  /// placement seed.
  bool random_layouts = false;
  std::uint64_t seed = 1;

  void validate() const;
  double effective_reward_scale(const env::WorldConfig& world) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpisodeRollout {
  std::vector<Transition> transitions;
  double episode_return = 0.0;
  double mean_aoi = 0.0;  // over users and slots 0..K-1
  env::Trajectory trajectory;
};

/// Runs one episode from a fresh reset with zeroed hiddens. Hiddens are stored
/// before each forward pass.
EpisodeRollout collect_episode(env::Environment& environment, encoder::PolicyNetwork& policy, double epsilon,
                               nn::Rng& rng, std::uint64_t layout_seed);

/// Target networks: frozen copies of the live policy and mixer.
struct TargetNetworks {
  encoder::PolicyNetwork policy;
  mixer::MixerNetwork mixer;
};

/// y = scale * r + gamma * Q_tot^target(argmax per agent, s'), or scale * r at
/// the horizon. B x 1, no gradient.
nn::Tensor td_targets(std::span<const Transition* const> batch, TargetNetworks& targets, double gamma,
                      double reward_scale);

/// Q_tot of the stored actions, recomputed from stored observations and hiddens
/// on `tape`. B x 1.
nn::Var chosen_q_tot(nn::Tape& tape, std::span<const Transition* const> batch, encoder::PolicyNetwork& policy,
                     mixer::MixerNetwork& mixer);

/// mean over the batch of (y - Q_tot)^2.
nn::Var td_loss(nn::Tape& tape, std::span<const Transition* const> batch, const nn::Tensor& targets,
                encoder::PolicyNetwork& policy, mixer::MixerNetwork& mixer);

struct EpisodeStats {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double episode_return = 0.0;
  double mean_aoi = 0.0;
  std::optional<double> loss_avg;
  double epsilon = 0.0;
  double wall_ms = 0.0;
};

/// Centralized trainer: live and target networks, replay, optimizer.
class Learner {
 public:
  Learner(env::WorldConfig world, encoder::EncoderConfig encoder, mixer::MixerConfig mixer, TrainConfig train);

  /// Collects one episode, stores it and performs the scheduled gradient steps.
  EpisodeStats run_episode();
  /// Runs `total_episodes` episodes, reporting each.
  void train(const std::function<void(const EpisodeStats&)>& on_episode = {});

  /// One gradient step on a uniform batch; nullopt when the buffer holds
  /// fewer than batch_size transitions.
  std::optional<double> train_step();
  void sync_targets();

  encoder::PolicyNetwork& policy() { return policy_; }
  mixer::MixerNetwork& mixer() { return mixer_; }
  TargetNetworks& targets() { return targets_; }
  ReplayBuffer& buffer() { return buffer_; }
  const TrainConfig& config() const { return train_; }
  const env::WorldConfig& world() const { return world_; }
  std::size_t episodes_done() const { return episodes_; }
  std::size_t gradient_steps() const { return gradient_steps_; }
  std::size_t sync_count() const { return syncs_; }
  nn::ParameterList trainable_parameters();

 private:
  env::WorldConfig world_;
  TrainConfig train_;
  env::Environment environment_;
  encoder::PolicyNetwork policy_;
  mixer::MixerNetwork mixer_;
  TargetNetworks targets_;
  ReplayBuffer buffer_;
  std::optional<nn::AdamState> adam_;
  nn::Rng rng_;
  std::size_t episodes_ = 0;
  std::size_t gradient_steps_ = 0;
  std::size_t syncs_ = 0;
};

struct EvaluationResult {
  double mean_aoi = 0.0;
  double mean_return = 0.0;
  std::vector<double> episode_mean_aoi;
  std::vector<double> episode_returns;
  std::vector<env::Trajectory> trajectories;
};

/// Greedy decentralized rollouts: only the policy is involved. Episodes use
/// the scenario layout, or with `random_layouts` the layouts
/// evaluation_layout_seed(seed, 0..episodes-1).
EvaluationResult evaluate_policy(const env::WorldConfig& world, encoder::PolicyNetwork policy,
                                 std::size_t episodes, std::uint64_t seed, bool random_layouts = false);

/// Seed of the index-th evaluation layout for a base seed.
std::uint64_t evaluation_layout_seed(std::uint64_t seed, std::size_t index);

}  // namespace qedgix::trainer
