#include "qedgix/trainer/trainer.hpp"

#include <chrono>

#include "qedgix/error.hpp"
#include "qedgix/nn/ops.hpp"

namespace qedgix::trainer {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

nn::Tensor stack_rows(std::span<const Transition* const> batch, nn::Tensor Transition::*field) {
  const nn::Tensor& first = batch.front()->*field;
  const std::size_t rows = first.rows(), cols = first.cols();
  nn::Tensor out({batch.size() * rows, cols});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const nn::Tensor& t = batch[b]->*field;
    require(t.size() == rows * cols, "transition tensors differ in shape");
    std::copy(t.values().begin(), t.values().end(), out.data() + b * rows * cols);
  }
  return out;
}

std::vector<const env::ObservationSet*> observations_of(
    std::span<const Transition* const> batch, std::shared_ptr<const env::ObservationSet> Transition::*field) {
  std::vector<const env::ObservationSet*> out;
  out.reserve(batch.size());
  for (const Transition* t : batch) out.push_back((t->*field).get());
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  require(target_sync_period > 0, "target_sync_period must be positive");
  require(buffer_capacity > 0, "buffer_capacity must be positive");
  require(batch_size <= buffer_capacity, "batch_size must not exceed buffer_capacity");
  require(reward_scale >= 0.0, "reward_scale must not be negative");
  require(grad_clip_norm >= 0.0, "grad_clip_norm must not be negative");
}

double TrainConfig::effective_reward_scale(const env::WorldConfig& world) const {
  if (reward_scale > 0.0) return reward_scale;
  return 1.0 / static_cast<double>(world.num_users * world.horizon);
}

std::uint64_t evaluation_layout_seed(std::uint64_t seed, std::size_t index) {
  return splitmix64(splitmix64(seed ^ 0x5EEDE7A1ULL) + index);
}

EpisodeRollout collect_episode(env::Environment& environment, encoder::PolicyNetwork& policy, double epsilon,
                               nn::Rng& rng, std::uint64_t layout_seed) {
  environment.reset(layout_seed);
  const env::WorldConfig& cfg = environment.config();
  EpisodeRollout rollout;
  rollout.transitions.reserve(cfg.horizon);
  rollout.trajectory.states.reserve(cfg.horizon + 1);
  rollout.trajectory.states.push_back(environment.state());

  nn::Tensor hidden = policy.initial_hidden();
  auto observation = std::make_shared<const env::ObservationSet>(environment.observations());
  nn::Tensor state = environment.global_state();
  double aoi_total = 0.0;
  while (!environment.done()) {
    for (auto a : environment.state().aoi) aoi_total += a;
    encoder::QResult q = policy.q_values(*observation, hidden);
    const env::JointAction action = encoder::select_actions(q.q, epsilon, rng);
    const env::StepOutcome outcome = environment.step(action);
    auto next_observation = std::make_shared<const env::ObservationSet>(environment.observations());
    nn::Tensor next_state = environment.global_state();

    Transition t;
    t.observation = observation;
    t.next_observation = next_observation;
    t.hidden = hidden;
    t.next_hidden = q.hidden;
    t.actions = action.directions;
    t.reward = outcome.reward;
    t.state = state;
    t.next_state = next_state;
    t.terminal = outcome.done;
    rollout.transitions.push_back(std::move(t));

    rollout.episode_return += outcome.reward;
    rollout.trajectory.states.push_back(environment.state());
    hidden = std::move(q.hidden);
    observation = std::move(next_observation);
    state = std::move(next_state);
  }
  rollout.mean_aoi = aoi_total / static_cast<double>(cfg.horizon * cfg.num_users);
  return rollout;
}

nn::Tensor td_targets(std::span<const Transition* const> batch, TargetNetworks& targets, double gamma,
                      double reward_scale) {
  require(!batch.empty(), "td_targets: empty batch");
  nn::Tape tape(false);
  const auto next_obs = observations_of(batch, &Transition::next_observation);
  const encoder::PolicyBatch inputs = encoder::PolicyBatch::build(next_obs, targets.policy.scaling());
  const auto out = targets.policy.forward(tape, inputs, tape.constant(stack_rows(batch, &Transition::next_hidden)));
  const std::size_t m = targets.policy.num_uavs();
  const nn::Var best = reshape(row_max(out.q), batch.size(), m);
  const nn::Tensor bootstrap =
      targets.mixer.mix(tape, best, tape.constant(stack_rows(batch, &Transition::next_state))).value();
  nn::Tensor y({batch.size(), 1});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    y[b] = reward_scale * batch[b]->reward;
    if (!batch[b]->terminal) y[b] += gamma * bootstrap[b];
  }
  return y;
}

nn::Var chosen_q_tot(nn::Tape& tape, std::span<const Transition* const> batch, encoder::PolicyNetwork& policy,
                     mixer::MixerNetwork& mixer) {
  const auto obs = observations_of(batch, &Transition::observation);
  const encoder::PolicyBatch inputs = encoder::PolicyBatch::build(obs, policy.scaling());
  const auto out = policy.forward(tape, inputs, tape.constant(stack_rows(batch, &Transition::hidden)));
  const std::size_t m = policy.num_uavs();
  std::vector<std::size_t> taken;
  taken.reserve(batch.size() * m);
  for (const Transition* t : batch) {
    require(t->actions.size() == m, "transition action count does not match the policy");
    for (auto a : t->actions) taken.push_back(a);
  }
  const nn::Var q_taken = reshape(pick(out.q, taken), batch.size(), m);
  return mixer.mix(tape, q_taken, tape.constant(stack_rows(batch, &Transition::state)));
}

nn::Var td_loss(nn::Tape& tape, std::span<const Transition* const> batch, const nn::Tensor& targets,
                encoder::PolicyNetwork& policy, mixer::MixerNetwork& mixer) {
  require(targets.size() == batch.size(), "td_loss: one target per transition required");
  const nn::Var q_tot = chosen_q_tot(tape, batch, policy, mixer);
  return mean(square(sub(q_tot, tape.constant(targets.reshaped({batch.size(), 1})))));
}

Learner::Learner(env::WorldConfig world, encoder::EncoderConfig encoder_config, mixer::MixerConfig mixer_config,
                 TrainConfig train)
    : world_(std::move(world)),
      train_(train),
      environment_(world_),
      policy_(encoder_config, world_.num_uavs, world_.num_users, encoder::scaling_for(world_),
              splitmix64(train.seed ^ 0xA11CEULL)),
      mixer_(mixer_config, world_.num_uavs, world_.state_width(), splitmix64(train.seed ^ 0xB0BULL)),
      targets_{policy_, mixer_},
      buffer_(train.buffer_capacity),
      rng_(splitmix64(train.seed)) {
  train_.validate();
  adam_.emplace(trainable_parameters(), nn::AdamConfig{train_.learning_rate});
}

nn::ParameterList Learner::trainable_parameters() {
  nn::ParameterList params = policy_.parameters();
  for (nn::Parameter* p : mixer_.parameters()) params.push_back(p);
  return params;
}

void Learner::sync_targets() {
  nn::copy_values(policy_.parameters(), targets_.policy.parameters());
  nn::copy_values(mixer_.parameters(), targets_.mixer.parameters());
  ++syncs_;
}

std::optional<double> Learner::train_step() {
  if (buffer_.size() < train_.batch_size) return std::nullopt;
  const auto batch = buffer_.sample(train_.batch_size, rng_);
  const nn::Tensor y = td_targets(batch, targets_, train_.gamma, train_.effective_reward_scale(world_));

  const nn::ParameterList params = trainable_parameters();
  nn::zero_grads(params);
  nn::Tape tape;
  const nn::Var loss = td_loss(tape, batch, y, policy_, mixer_);
  tape.backward(loss);
  if (train_.grad_clip_norm > 0.0) nn::clip_grad_norm(params, train_.grad_clip_norm);
  nn::adam_step(params, *adam_);

  ++gradient_steps_;
  if (gradient_steps_ % train_.target_sync_period == 0) sync_targets();
  return loss.value()[0];
}

EpisodeStats Learner::run_episode() {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t draw = rng_();
  const std::uint64_t layout_seed = train_.random_layouts ? draw : world_.user_placement_seed;
  EpisodeRollout rollout = collect_episode(environment_, policy_, train_.epsilon, rng_, layout_seed);

  EpisodeStats stats;
  stats.episode = episodes_;
  stats.steps = rollout.transitions.size();
  stats.episode_return = rollout.episode_return;
  stats.mean_aoi = rollout.mean_aoi;
  stats.epsilon = train_.epsilon;
  for (Transition& t : rollout.transitions) buffer_.push(std::move(t));
  ++episodes_;

  if (episodes_ > train_.warmup_episodes) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < train_.train_steps_per_episode; ++k) {
      if (auto loss = train_step()) {
        total += *loss;
        ++count;
      }
    }
    if (count) stats.loss_avg = total / static_cast<double>(count);
  }
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

void Learner::train(const std::function<void(const EpisodeStats&)>& on_episode) {
  while (episodes_ < train_.total_episodes) {
    const EpisodeStats stats = run_episode();
    if (on_episode) on_episode(stats);
  }
}

EvaluationResult evaluate_policy(const env::WorldConfig& world, encoder::PolicyNetwork policy, std::size_t episodes,
                                 std::uint64_t seed, bool random_layouts) {
  env::Environment environment(world);
  nn::Rng rng(seed);  // unused by greedy selection; kept for the shared rollout path
  EvaluationResult result;
  for (std::size_t e = 0; e < episodes; ++e) {
    EpisodeRollout rollout = collect_episode(environment, policy, 0.0, rng,
                                              random_layouts ? evaluation_layout_seed(seed, e) : world.user_placement_seed);
    result.episode_mean_aoi.push_back(rollout.mean_aoi);
    result.episode_returns.push_back(rollout.episode_return);
    result.trajectories.push_back(std::move(rollout.trajectory));
  }
  for (std::size_t e = 0; e < episodes; ++e) {
    result.mean_aoi += result.episode_mean_aoi[e] / static_cast<double>(episodes);
    result.mean_return += result.episode_returns[e] / static_cast<double>(episodes);
  }
  return result;
}

}  // namespace qedgix::trainer
