#include <doctest.h>

#include <set>

#include "qedgix/error.hpp"
#include "qedgix/nn/gradcheck.hpp"
#include "qedgix/trainer/trainer.hpp"

using namespace qedgix;
using namespace qedgix::trainer;
using nn::Tensor;

namespace {

encoder::EncoderConfig small_encoder() {
  encoder::EncoderConfig c;
  c.feature_width = c.recurrent_width = c.edge_hidden_width = 8;
  return c;
}

mixer::MixerConfig small_mixer() { return mixer::MixerConfig{6, 8}; }

env::WorldConfig small_world(std::size_t horizon = 20) {
  env::WorldConfig w;
  w.num_uavs = 2;
  w.num_users = 3;
  w.horizon = horizon;
  return w;
}

TrainConfig small_train() {
  TrainConfig t;
  t.batch_size = 8;
  t.buffer_capacity = 200;
  t.warmup_episodes = 1;
  t.total_episodes = 6;
  t.target_sync_period = 3;
  t.train_steps_per_episode = 2;
  t.seed = 5;
  return t;
}

Transition dummy(double reward) {
  Transition t;
  t.reward = reward;
  return t;
}

}  // namespace

TEST_CASE("replay buffer evicts oldest first and samples distinct items") {
  ReplayBuffer buffer(3);
  for (int i = 0; i < 5; ++i) buffer.push(dummy(i));
  CHECK(buffer.size() == 3);
  CHECK(buffer[0].reward == 2.0);
  CHECK(buffer[2].reward == 4.0);
  nn::Rng rng(1);
  const auto batch = buffer.sample(3, rng);
  std::set<const Transition*> unique(batch.begin(), batch.end());
  CHECK(unique.size() == 3);
  CHECK_THROWS_AS(buffer.sample(4, rng), ContractViolation);
  CHECK_THROWS_AS(ReplayBuffer(0), ContractViolation);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.gamma = 0.0;
  CHECK_THROWS_AS(t.validate(), ContractViolation);
  t = TrainConfig{};
  t.batch_size = 6000;
  CHECK_THROWS_AS(t.validate(), ContractViolation);
}

TEST_CASE("collect_episode produces K transitions with stored hiddens") {
  env::WorldConfig w = small_world(80);
  env::Environment e(w);
  encoder::PolicyNetwork policy(small_encoder(), 2, 3, encoder::scaling_for(w), 3);
  nn::Rng rng(4);
  const EpisodeRollout r = collect_episode(e, policy, 0.0, rng, 11);
  REQUIRE(r.transitions.size() == 80);
  for (std::size_t k = 0; k + 1 < 80; ++k) CHECK(!r.transitions[k].terminal);
  CHECK(r.transitions.back().terminal);
  CHECK(r.trajectory.states.size() == 81);
  double ret = 0.0;
  for (const Transition& t : r.transitions) ret += t.reward;
  CHECK(r.episode_return == ret);
  CHECK(r.mean_aoi == doctest::Approx(env::trajectory_mean_aoi(r.trajectory)));
  for (double v : r.transitions.front().hidden.values()) CHECK(v == 0.0);

  // greedy replay from stored hiddens reproduces every action
  for (const Transition& t : r.transitions) {
    const encoder::QResult q = policy.q_values(*t.observation, t.hidden);
    nn::Rng unused(0);
    CHECK(encoder::select_actions(q.q, 0.0, unused).directions == t.actions);
    CHECK(q.hidden == t.next_hidden);
  }
}

TEST_CASE("episode return is zero when every user is always covered") {
  env::WorldConfig w = small_world(10);
  w.transmission_range_xi = w.detection_range_xi = 40.0;  // 1.6 km covers the area
  env::Environment e(w);
  encoder::PolicyNetwork policy(small_encoder(), 2, 3, encoder::scaling_for(w), 3);
  nn::Rng rng(4);
  CHECK(collect_episode(e, policy, 0.5, rng, 1).episode_return == 0.0);
}

TEST_CASE("td targets: terminal, bootstrap and no gradient into targets") {
  const env::WorldConfig w = small_world(5);
  Learner learner(w, small_encoder(), small_mixer(), small_train());
  env::Environment e(w);
  nn::Rng rng(6);
  EpisodeRollout r = collect_episode(e, learner.policy(), 0.3, rng, 2);

  // Outer hypernetwork emits W = 0 and b_out = -10; inner emits W = 0.
  nn::ParameterList mp = learner.targets().mixer.parameters();
  for (nn::Parameter* p : mp) p->value.fill(0.0);
  mp[7]->value[6] = -10.0;

  std::vector<const Transition*> batch;
  r.transitions[0].reward = -5.0;
  r.transitions.back().reward = -5.0;
  batch.push_back(&r.transitions[0]);
  batch.push_back(&r.transitions.back());
  const Tensor y = td_targets(batch, learner.targets(), 0.99, 1.0);
  CHECK(y[0] == doctest::Approx(-14.9).epsilon(1e-14));
  CHECK(y[1] == -5.0);

  for (nn::Parameter* p : learner.targets().policy.parameters()) p->zero_grad();
  nn::Tape tape;
  tape.backward(td_loss(tape, batch, y, learner.policy(), learner.mixer()));
  for (nn::Parameter* p : learner.targets().policy.parameters())
    for (double g : p->grad.values()) CHECK(g == 0.0);
  for (nn::Parameter* p : learner.targets().mixer.parameters())
    for (double g : p->grad.values()) CHECK(g == 0.0);
  CHECK_THROWS_AS(td_targets({}, learner.targets(), 0.99, 1.0), ContractViolation);
}

TEST_CASE("td loss examples and chain-rule gradient") {
  const env::WorldConfig w = small_world(5);
  Learner learner(w, small_encoder(), small_mixer(), small_train());
  env::Environment e(w);
  nn::Rng rng(7);
  EpisodeRollout r = collect_episode(e, learner.policy(), 0.3, rng, 2);
  std::vector<const Transition*> batch;
  for (const Transition& t : r.transitions) batch.push_back(&t);

  const nn::ParameterList params = learner.trainable_parameters();
  {
    nn::Tape probe(false);
    const Tensor exact = chosen_q_tot(probe, batch, learner.policy(), learner.mixer()).value();
    nn::zero_grads(params);
    nn::Tape tape;
    const nn::Var loss = td_loss(tape, batch, exact, learner.policy(), learner.mixer());
    CHECK(loss.value()[0] == 0.0);
    tape.backward(loss);
    for (nn::Parameter* p : params)
      for (double g : p->grad.values()) CHECK(g == 0.0);
  }
  {
    Learner zeroed(w, small_encoder(), small_mixer(), small_train());
    for (nn::Parameter* p : zeroed.mixer().parameters()) p->value.fill(0.0);
    std::vector<const Transition*> one{batch.front()};
    nn::Tape tape(false);
    CHECK(td_loss(tape, one, Tensor({1, 1}, 1.0), zeroed.policy(), zeroed.mixer()).value()[0] == 1.0);
  }
  Tensor y({batch.size(), 1});
  for (std::size_t b = 0; b < batch.size(); ++b) y[b] = -1.0 - 0.1 * static_cast<double>(b);
  const auto report = nn::check_gradients(
      [&](nn::Tape& t) { return td_loss(t, batch, y, learner.policy(), learner.mixer()); }, params);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("train step readiness, sync cadence and frozen targets") {
  const env::WorldConfig w = small_world(5);
  TrainConfig cfg = small_train();
  cfg.warmup_episodes = 100;  // drive steps manually
  Learner learner(w, small_encoder(), small_mixer(), cfg);
  CHECK(!learner.train_step().has_value());
  learner.run_episode();
  learner.run_episode();
  REQUIRE(learner.buffer().size() >= cfg.batch_size);

  env::WorldConfig probe_world = w;
  const env::ObservationSet obs = env::build_observations(env::reset(probe_world, 3), probe_world);
  const auto target_q = [&] { return learner.targets().policy.q_values(obs, learner.policy().initial_hidden()).q; };
  const auto live_q = [&] { return learner.policy().q_values(obs, learner.policy().initial_hidden()).q; };

  const Tensor before = target_q();
  for (int g = 1; g <= 7; ++g) {
    REQUIRE(learner.train_step().has_value());
    CHECK(learner.sync_count() == static_cast<std::size_t>(g / 3));
    if (g % 3 == 0) {
      CHECK(target_q() == live_q());
      nn::ParameterList a = learner.policy().parameters(), b = learner.targets().policy.parameters();
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
    }
    if (g < 3) CHECK(target_q() == before);
  }
  CHECK(target_q() != live_q());
}

TEST_CASE("training trace is reproducible for a fixed seed") {
  const auto trace = [] {
    Learner learner(small_world(10), small_encoder(), small_mixer(), small_train());
    std::vector<double> out;
    learner.train([&](const EpisodeStats& s) {
      out.push_back(s.episode_return);
      out.push_back(s.loss_avg.value_or(-1.0));
    });
    return out;
  };
  const auto a = trace();
  CHECK(a.size() == 12);
  CHECK(a == trace());
}

TEST_CASE("evaluation never touches the mixer and is repeatable") {
  const env::WorldConfig w = small_world(30);
  Learner learner(w, small_encoder(), small_mixer(), small_train());
  const auto before = mixer::MixerNetwork::evaluation_count();
  const EvaluationResult a = evaluate_policy(w, learner.policy(), 3, 9, true);
  CHECK(mixer::MixerNetwork::evaluation_count() == before);
  const EvaluationResult b = evaluate_policy(w, learner.policy(), 3, 9, true);
  REQUIRE(a.trajectories.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) CHECK(a.trajectories[e].states == b.trajectories[e].states);
  CHECK(a.mean_aoi == b.mean_aoi);
  CHECK(a.trajectories[0].states[0].user_positions != a.trajectories[1].states[0].user_positions);

  const EvaluationResult fixed = evaluate_policy(w, learner.policy(), 2, 9);
  CHECK(fixed.trajectories[0].states[0].user_positions == env::reset(w, w.user_placement_seed).user_positions);
}
