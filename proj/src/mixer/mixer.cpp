#include "qedgix/mixer/mixer.hpp"

#include <atomic>
#include <cmath>

#include "qedgix/error.hpp"
#include "qedgix/nn/ops.hpp"

namespace qedgix::mixer {

namespace {
std::atomic<std::uint64_t> g_evaluations{0};
}

void MixerConfig::validate() const {
  require(embed_width > 0 && hyper_hidden_width > 0, "mixer widths must be positive");
}

MixerNetwork::MixerNetwork(MixerConfig config, std::size_t num_agents, std::size_t state_width, std::uint64_t seed)
    : config_(config), num_agents_(num_agents), state_width_(state_width) {
  config_.validate();
  require(num_agents >= 1 && state_width >= 1, "mixer needs agents and a state");
  nn::Rng rng(seed);
  const std::size_t e = config_.embed_width;
  inner_hyper_ = nn::Mlp2("inner_hyper", state_width, config_.hyper_hidden_width, 2 * e, rng);
  outer_hyper_ = nn::Mlp2("outer_hyper", state_width, config_.hyper_hidden_width, e + 1, rng);
  // Output biases start the mixer near Q_tot = sum_i q_i with every inner
  // ReLU active; with fan-in biases alone the units tend to die early and
  // Q_tot collapses to b_out(s).
  for (std::size_t k = 0; k < e; ++k) {
    inner_hyper_.second.bias.value[k] = 1.0;
    inner_hyper_.second.bias.value[e + k] = kInnerBiasInit;
    outer_hyper_.second.bias.value[k] = 1.0 / static_cast<double>(e);
  }
  outer_hyper_.second.bias.value[e] = -kInnerBiasInit * static_cast<double>(num_agents);
}

Var MixerNetwork::inner_map(Tape& tape, Var q, Var states) {
  require(q.cols() == 1 && states.rows() == q.rows(), "inner_map: one q value and one state per row");
  require(states.cols() == state_width_, "inner_map: state width mismatch");
  g_evaluations.fetch_add(1, std::memory_order_relaxed);
  const std::size_t e = config_.embed_width;
  const Var hyper = inner_hyper_.forward(tape, states);
  const Var weight = absolute(slice_cols(hyper, 0, e));
  const Var bias = slice_cols(hyper, e, 2 * e);
  return relu(add(mul_col(weight, q), bias));
}

Var MixerNetwork::mix(Tape& tape, Var q_locals, Var states) {
  require(q_locals.cols() == num_agents_, [&] { return "mix: expected " + std::to_string(num_agents_) + " agent values, got " +
                                              std::to_string(q_locals.cols()); });
  require(states.rows() == q_locals.rows() && states.cols() == state_width_, "mix: state batch mismatch");
  g_evaluations.fetch_add(1, std::memory_order_relaxed);
  const std::size_t e = config_.embed_width;
  const std::size_t batch = q_locals.rows();

  // The inner hypernetwork depends on the state only, so it is evaluated once
  // per transition and broadcast to the agents.
  const Var hyper = inner_hyper_.forward(tape, states);
  const Var weight = repeat_rows(absolute(slice_cols(hyper, 0, e)), num_agents_);
  const Var bias = repeat_rows(slice_cols(hyper, e, 2 * e), num_agents_);
  const Var q = reshape(q_locals, batch * num_agents_, 1);
  const Var features = relu(add(mul_col(weight, q), bias));
  const Var pooled = segment_sum_rows(features, num_agents_);

  const Var outer = outer_hyper_.forward(tape, states);
  const Var out_weight = absolute(slice_cols(outer, 0, e));
  const Var out_bias = slice_cols(outer, e, e + 1);
  return add(row_sum(mul(out_weight, pooled)), out_bias);
}

double MixerNetwork::mix_value(const Tensor& q_locals, const Tensor& state) {
  Tape tape(false);
  const Var q = tape.constant(q_locals.reshaped({1, q_locals.size()}));
  const Var s = tape.constant(state.reshaped({1, state.size()}));
  return mix(tape, q, s).value()[0];
}

nn::ParameterList MixerNetwork::parameters() {
  nn::ParameterList out;
  inner_hyper_.collect(out);
  outer_hyper_.collect(out);
  return out;
}

std::uint64_t MixerNetwork::evaluation_count() { return g_evaluations.load(std::memory_order_relaxed); }

ConsistencyReport argmax_consistency_check(const Tensor& q, MixerNetwork& mixer, const Tensor& state,
                                           double tolerance) {
  const std::size_t agents = q.rows();
  const std::size_t actions = q.cols();
  require(agents == mixer.num_agents(), "consistency check: Q rows must match the mixer's agent count");
  require(agents <= 4, "consistency check enumerates actions^M tuples; M must be small");

  std::size_t tuples = 1;
  for (std::size_t i = 0; i < agents; ++i) tuples *= actions;

  Tensor q_locals({tuples, agents});
  Tensor states({tuples, state.size()});
  for (std::size_t t = 0; t < tuples; ++t) {
    std::size_t code = t;
    for (std::size_t i = 0; i < agents; ++i) {
      q_locals(t, i) = q(i, code % actions);
      code /= actions;
    }
    std::copy(state.values().begin(), state.values().end(), states.data() + t * state.size());
  }
  Tape tape(false);
  const Tensor mixed = mixer.mix(tape, tape.constant(q_locals), tape.constant(states)).value();

  ConsistencyReport report;
  report.unique_greedy = true;
  report.greedy_actions.resize(agents);
  std::size_t greedy_code = 0, stride = 1;
  for (std::size_t i = 0; i < agents; ++i) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < actions; ++a)
      if (q(i, a) > q(i, best)) best = a;
    for (std::size_t a = 0; a < actions; ++a)
      if (a != best && q(i, a) == q(i, best)) report.unique_greedy = false;
    report.greedy_actions[i] = best;
    greedy_code += best * stride;
    stride *= actions;
  }
  std::size_t best_code = 0;
  for (std::size_t t = 1; t < tuples; ++t)
    if (mixed[t] > mixed[best_code]) best_code = t;
  report.best_actions.resize(agents);
  for (std::size_t i = 0, code = best_code; i < agents; ++i, code /= actions) report.best_actions[i] = code % actions;
  report.greedy_value = mixed[greedy_code];
  report.best_value = mixed[best_code];
  report.consistent = report.greedy_value >= report.best_value - tolerance * std::max(1.0, std::abs(report.best_value));
  return report;
}

}  // namespace qedgix::mixer
