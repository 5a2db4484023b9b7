#pragma once

#include <span>
#include <string>

#include "qedgix/env/world.hpp"
#include "qedgix/nn/layers.hpp"

namespace qedgix::encoder {

using nn::Tape;
using nn::Tensor;
using nn::Var;

enum class GraphVariant { EdgeConv, Aggregation, None };

std::string to_string(GraphVariant variant);
/// Accepts "edgeconv", "agg-baseline", "none-baseline".
GraphVariant parse_variant(const std::string& tag);

struct EncoderConfig {
  std::size_t feature_width = 64;    // F, also the recurrent width
  std::size_t recurrent_width = 64;  // h
  std::size_t graph_layers = 2;      // L
  std::size_t edge_hidden_width = 64;
  GraphVariant variant = GraphVariant::EdgeConv;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Multipliers applied to raw observation entries before they reach the
/// networks: relative coordinates, AoI values and the node's own position.
struct InputScaling {
  double position = 1.0;
  double aoi = 1.0;
  double area = 1.0;
  friend bool operator==(const InputScaling&, const InputScaling&) = default;
};

/// Relative coordinates / detection range, AoI / horizon, own position / area.
InputScaling scaling_for(const env::WorldConfig& config);

/// Symmetric 0/1 adjacency (row-major, n x n) to a neighbor list.
nn::NeighborList neighbors_from_adjacency(std::span<const std::uint8_t> adjacency, std::size_t nodes);

/// X'_i = sum_{j in N(i)} f(X_i || X_j - X_i), f = Linear -> ReLU -> Linear.
/// The first layer of f is split into the X_i and (X_j - X_i) blocks so the
/// per-node products are computed once; the second layer commutes with the
/// neighbor sum.
struct EdgeConvLayer {
  EdgeConvLayer() = default;
  EdgeConvLayer(const std::string& name, std::size_t width, std::size_t hidden, nn::Rng& rng);

  Var forward(Tape& tape, Var features, const nn::NeighborList& graph);
  /// Output rows for the first `rows` nodes only.
  Var forward(Tape& tape, Var features, const nn::NeighborList& graph, std::size_t rows);
  void collect(nn::ParameterList& out) { f.collect(out); }

  nn::Mlp2 f;
};

/// X'_i = g(X_i || sum_{j in N(i)} X_j).
struct AggregationLayer {
  AggregationLayer() = default;
  AggregationLayer(const std::string& name, std::size_t width, std::size_t hidden, nn::Rng& rng);

  Var forward(Tape& tape, Var features, const nn::NeighborList& graph);
  Var forward(Tape& tape, Var features, const nn::NeighborList& graph, std::size_t rows);
  void collect(nn::ParameterList& out) { g.collect(out); }

  nn::Mlp2 g;
};

/// Width of one encoder input row: own position (2), then per UAV slot
/// (seen, dx, dy), then per user slot (seen, dx, dy, aoi).
std::size_t input_row_width(std::size_t num_uavs, std::size_t num_users);

/// One node's encoder input. Within the UAV block and within the user block
/// the slots are sorted (seen slots first, then by distance and the remaining
/// entries), so the row does not depend on how entities are numbered.
void encode_observation_row(const env::ObservationSet& obs, std::size_t node, const InputScaling& scaling,
                            double* out);

/// Batched policy input. Node rows are ordered with every UAV of every
/// transition first (transition-major), followed by every user node.
struct PolicyBatch {
  std::size_t batch = 0;
  std::size_t num_uavs = 0;
  std::size_t num_users = 0;
  Tensor uav_inputs;   // (B*M) x input_row_width
  Tensor user_inputs;  // (B*N) x input_row_width
  nn::NeighborList graph;

  static PolicyBatch build(std::span<const env::ObservationSet* const> observations, const InputScaling& scaling);
  static PolicyBatch build(const env::ObservationSet& observation, const InputScaling& scaling);

  std::size_t uav_node(std::size_t transition, std::size_t uav) const { return transition * num_uavs + uav; }
  std::size_t user_node(std::size_t transition, std::size_t user) const {
    return batch * num_uavs + transition * num_users + user;
  }
};

struct QResult {
  Tensor q;       // M x 8
  Tensor hidden;  // M x h
};

/// Graph-structured recurrent Q-network shared by all UAVs.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(EncoderConfig config, std::size_t num_uavs, std::size_t num_users, InputScaling scaling,
                std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const InputScaling& scaling() const { return scaling_; }
  std::size_t num_uavs() const { return num_uavs_; }
  std::size_t num_users() const { return num_users_; }
  std::size_t input_width() const { return input_row_width(num_uavs_, num_users_); }

  struct Output {
    Var q;       // (B*M) x 8
    Var hidden;  // (B*M) x h
  };

  /// `hidden` holds one row per UAV node, in PolicyBatch order.
  Output forward(Tape& tape, const PolicyBatch& batch, Var hidden);

  Var encode_uav_nodes(Tape& tape, Var uav_inputs, Var hidden);
  Var encode_user_nodes(Tape& tape, Var user_inputs);
  /// Applies the configured graph stack to all node rows.
  Var propagate(Tape& tape, Var nodes, const nn::NeighborList& graph);
  /// Same, but the last layer is evaluated for the first `rows` nodes only.
  Var propagate(Tape& tape, Var nodes, const nn::NeighborList& graph, std::size_t rows);

  /// Single-step inference without gradient recording.
  QResult q_values(const env::ObservationSet& observation, const Tensor& hidden);
  Tensor initial_hidden(std::size_t batch = 1) const;

  nn::ParameterList parameters();

 private:
  EncoderConfig config_;
  InputScaling scaling_;
  std::size_t num_uavs_ = 0;
  std::size_t num_users_ = 0;

  nn::GruCell uav_encoder_;
  nn::Mlp2 user_encoder_;
  std::vector<EdgeConvLayer> edge_layers_;
  std::vector<AggregationLayer> agg_layers_;
  nn::Linear head_;
};

/// Per UAV: with probability epsilon a uniformly random direction, otherwise
/// the argmax of its Q row (lowest index on ties).
env::JointAction select_actions(const Tensor& q, double epsilon, nn::Rng& rng);

/// Index of the largest entry of row r, lowest index on ties.
std::size_t argmax_row(const Tensor& q, std::size_t row);

}  // namespace qedgix::encoder
