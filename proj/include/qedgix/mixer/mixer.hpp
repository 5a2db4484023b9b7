#pragma once

#include <cstdint>
#include <vector>

#include "qedgix/nn/layers.hpp"

namespace qedgix::mixer {

using nn::Tape;
using nn::Tensor;
using nn::Var;

struct MixerConfig {
  std::size_t embed_width = 32;
  std::size_t hyper_hidden_width = 64;

  void validate() const;
  friend bool operator==(const MixerConfig&, const MixerConfig&) = default;
};

/// Permutation-invariant monotonic mixer:
///
///   [W_in, b_in]   = Psi_inner(s)                      shared by all agents
///   phi(q_i)       = relu(|W_in| q_i + b_in)
///   [W_out, b_out] = Psi_outer(s)
///   Q_tot          = |W_out| . sum_i phi(q_i) + b_out
///
/// The hypernetworks are Linear -> ReLU -> Linear perceptrons of the global
/// state. Only the generated weights pass through the absolute value.
class MixerNetwork {
 public:
  /// Initial value of the generated inner bias b_in.
  static constexpr double kInnerBiasInit = 5.0;

  MixerNetwork() = default;
  MixerNetwork(MixerConfig config, std::size_t num_agents, std::size_t state_width, std::uint64_t seed);

  const MixerConfig& config() const { return config_; }
  std::size_t num_agents() const { return num_agents_; }
  std::size_t state_width() const { return state_width_; }

  /// q: n x 1, states: n x S -> n x embed.
  Var inner_map(Tape& tape, Var q, Var states);
  /// q_locals: B x M, states: B x S -> B x 1.
  Var mix(Tape& tape, Var q_locals, Var states);
  /// Gradient-free single evaluation; q_locals has M entries.
  double mix_value(const Tensor& q_locals, const Tensor& state);

  nn::ParameterList parameters();

  /// Number of mixer evaluations performed by any instance in this process.
  static std::uint64_t evaluation_count();

 private:
  MixerConfig config_;
  std::size_t num_agents_ = 0;
  std::size_t state_width_ = 0;
  nn::Mlp2 inner_hyper_;
  nn::Mlp2 outer_hyper_;
};

struct ConsistencyReport {
  bool consistent = false;
  bool unique_greedy = false;  // every agent's argmax is unique
  double greedy_value = 0.0;
  double best_value = 0.0;
  std::vector<std::size_t> greedy_actions;
  std::vector<std::size_t> best_actions;
};

/// Enumerates all 8^M joint actions (M x 8 Q matrix) and checks that the tuple
/// of per-agent argmaxes attains the maximum mixed value.
ConsistencyReport argmax_consistency_check(const Tensor& q, MixerNetwork& mixer, const Tensor& state,
                                           double tolerance = 1e-12);

}  // namespace qedgix::mixer
