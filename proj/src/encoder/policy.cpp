#include "qedgix/encoder/policy.hpp"

#include <algorithm>

#include "qedgix/error.hpp"

namespace qedgix::encoder {

std::string to_string(GraphVariant variant) {
  switch (variant) {
    case GraphVariant::EdgeConv: return "edgeconv";
    case GraphVariant::Aggregation: return "agg-baseline";
    case GraphVariant::None: return "none-baseline";
  }
  return "unknown";
}

GraphVariant parse_variant(const std::string& tag) {
  if (tag == "edgeconv") return GraphVariant::EdgeConv;
  if (tag == "agg-baseline") return GraphVariant::Aggregation;
  if (tag == "none-baseline") return GraphVariant::None;
  throw ContractViolation("unknown encoder variant '" + tag + "'");
}

void EncoderConfig::validate() const {
  require(feature_width > 0 && recurrent_width > 0 && edge_hidden_width > 0, "encoder widths must be positive");
  require(feature_width == recurrent_width, "recurrent output doubles as the node feature: widths must match");
  require(variant == GraphVariant::None || graph_layers >= 1, "graph variants need at least one layer");
}

InputScaling scaling_for(const env::WorldConfig& config) {
  return InputScaling{1.0 / config.detection_range(), 1.0 / static_cast<double>(config.horizon),
                      1.0 / config.area_side_km};
}

std::size_t input_row_width(std::size_t num_uavs, std::size_t num_users) {
  return 2 + 3 * num_uavs + 4 * num_users;
}

namespace {

// Sorts fixed-width slots lexicographically, seen slots (flag 1) first.
void sort_slots(double* begin, std::size_t count, std::size_t width) {
  std::vector<std::vector<double>> slots(count);
  for (std::size_t k = 0; k < count; ++k) slots[k].assign(begin + k * width, begin + (k + 1) * width);
  std::sort(slots.begin(), slots.end(), [](const std::vector<double>& a, const std::vector<double>& b) {
    if (a[0] != b[0]) return a[0] > b[0];
    const double da = a[1] * a[1] + a[2] * a[2], db = b[1] * b[1] + b[2] * b[2];
    if (da != db) return da < db;
    return std::lexicographical_compare(a.begin() + 1, a.end(), b.begin() + 1, b.end());
  });
  for (std::size_t k = 0; k < count; ++k) std::copy(slots[k].begin(), slots[k].end(), begin + k * width);
}

}  // namespace

void encode_observation_row(const env::ObservationSet& obs, std::size_t node, const InputScaling& scaling,
                            double* out) {
  const std::size_t m = obs.num_uavs, n = obs.num_users;
  require(node < obs.num_nodes(), "observation row index out of range");
  require(obs.positions.size() == obs.num_nodes(), "observation set lacks node positions");
  // own position, centred on the area
  out[0] = 2.0 * obs.positions[node].x * scaling.area - 1.0;
  out[1] = 2.0 * obs.positions[node].y * scaling.area - 1.0;
  double* uav_out = out + 2;
  const double* uav = obs.uav_row(node);
  for (std::size_t k = 0; k < m; ++k) {
    const bool seen = k != node && obs.adjacent(node, k);
    uav_out[3 * k] = seen ? 1.0 : 0.0;
    uav_out[3 * k + 1] = uav[2 * k] * scaling.position;
    uav_out[3 * k + 2] = uav[2 * k + 1] * scaling.position;
  }
  double* user_out = uav_out + 3 * m;
  const double* user = obs.user_row(node);
  for (std::size_t j = 0; j < n; ++j) {
    const bool seen = m + j != node && obs.adjacent(node, m + j);
    user_out[4 * j] = seen ? 1.0 : 0.0;
    user_out[4 * j + 1] = user[3 * j] * scaling.position;
    user_out[4 * j + 2] = user[3 * j + 1] * scaling.position;
    user_out[4 * j + 3] = user[3 * j + 2] * scaling.aoi;
  }
  sort_slots(uav_out, m, 3);
  sort_slots(user_out, n, 4);
}

nn::NeighborList neighbors_from_adjacency(std::span<const std::uint8_t> adjacency, std::size_t nodes) {
  require(adjacency.size() == nodes * nodes, "adjacency must be nodes x nodes");
  nn::NeighborList graph;
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < nodes; ++i) {
    row.clear();
    for (std::size_t j = 0; j < nodes; ++j)
      if (j != i && adjacency[i * nodes + j]) row.push_back(static_cast<std::uint32_t>(j));
    graph.add_node(row);
  }
  return graph;
}

EdgeConvLayer::EdgeConvLayer(const std::string& name, std::size_t width, std::size_t hidden, nn::Rng& rng)
    : f(name, 2 * width, hidden, width, rng) {}

Var EdgeConvLayer::forward(Tape& tape, Var features, const nn::NeighborList& graph) {
  return forward(tape, features, graph, features.rows());
}

Var EdgeConvLayer::forward(Tape& tape, Var features, const nn::NeighborList& graph, std::size_t rows) {
  const std::size_t width = features.cols();
  require(f.first.in_features() == 2 * width, "edgeconv: feature width mismatch");
  require(rows <= features.rows(), "edgeconv: more output rows than nodes");
  const Var w1 = tape.parameter(f.first.weight);
  const Var w_own = slice_rows(w1, 0, width);
  const Var w_diff = slice_rows(w1, width, 2 * width);
  // W_own X_i + W_diff (X_j - X_i) = (W_own - W_diff) X_i + W_diff X_j
  const Var targets = rows == features.rows() ? features : slice_rows(features, 0, rows);
  const Var left = matmul(targets, sub(w_own, w_diff));
  const Var right = matmul(features, w_diff);
  const Var summed = edge_relu_sum(left, right, tape.parameter(f.first.bias), graph);
  std::vector<double> degree(rows);
  for (std::size_t i = 0; i < rows; ++i) degree[i] = static_cast<double>(graph.degree(i));
  return add_scaled_row(matmul(summed, tape.parameter(f.second.weight)), degree, tape.parameter(f.second.bias));
}

AggregationLayer::AggregationLayer(const std::string& name, std::size_t width, std::size_t hidden, nn::Rng& rng)
    : g(name, 2 * width, hidden, width, rng) {}

Var AggregationLayer::forward(Tape& tape, Var features, const nn::NeighborList& graph) {
  return forward(tape, features, graph, features.rows());
}

Var AggregationLayer::forward(Tape& tape, Var features, const nn::NeighborList& graph, std::size_t rows) {
  require(rows <= features.rows(), "aggregation: more output rows than nodes");
  const Var own = rows == features.rows() ? features : slice_rows(features, 0, rows);
  return g.forward(tape, nn::concat_cols({own, neighbor_sum(features, graph, rows)}));
}

PolicyBatch PolicyBatch::build(std::span<const env::ObservationSet* const> observations,
                               const InputScaling& scaling) {
  require(!observations.empty(), "policy batch must not be empty");
  PolicyBatch b;
  b.batch = observations.size();
  b.num_uavs = observations.front()->num_uavs;
  b.num_users = observations.front()->num_users;
  const std::size_t m = b.num_uavs, n = b.num_users, nodes = m + n;
  const std::size_t width = input_row_width(m, n);
  b.uav_inputs = Tensor({b.batch * m, width});
  b.user_inputs = Tensor({b.batch * n, width});

  const auto fill_row = [&](const env::ObservationSet& obs, std::size_t node, double* out) {
    encode_observation_row(obs, node, scaling, out);
  };
  for (std::size_t t = 0; t < b.batch; ++t) {
    const env::ObservationSet& obs = *observations[t];
    require(obs.num_uavs == m && obs.num_users == n, "all observations in a batch must share dimensions");
    for (std::size_t i = 0; i < m; ++i) fill_row(obs, i, b.uav_inputs.data() + (t * m + i) * width);
    for (std::size_t j = 0; j < n; ++j) fill_row(obs, m + j, b.user_inputs.data() + (t * n + j) * width);
  }

  std::vector<std::uint32_t> row;
  const auto add_node = [&](std::size_t t, std::size_t local) {
    const env::ObservationSet& obs = *observations[t];
    row.clear();
    for (std::size_t k = 0; k < nodes; ++k) {
      if (k == local || !obs.adjacent(local, k)) continue;
      row.push_back(static_cast<std::uint32_t>(k < m ? b.uav_node(t, k) : b.user_node(t, k - m)));
    }
    b.graph.add_node(row);
  };
  for (std::size_t t = 0; t < b.batch; ++t)
    for (std::size_t i = 0; i < m; ++i) add_node(t, i);
  for (std::size_t t = 0; t < b.batch; ++t)
    for (std::size_t j = 0; j < n; ++j) add_node(t, m + j);
  return b;
}

PolicyBatch PolicyBatch::build(const env::ObservationSet& observation, const InputScaling& scaling) {
  const env::ObservationSet* one[] = {&observation};
  return build(std::span<const env::ObservationSet* const>(one, 1), scaling);
}

PolicyNetwork::PolicyNetwork(EncoderConfig config, std::size_t num_uavs, std::size_t num_users,
                             InputScaling scaling, std::uint64_t seed)
    : config_(config), scaling_(scaling), num_uavs_(num_uavs), num_users_(num_users) {
  config_.validate();
  require(num_uavs >= 1 && num_users >= 1, "policy needs at least one UAV and one user");
  nn::Rng rng(seed);
  const std::size_t width = input_width();
  uav_encoder_ = nn::GruCell("uav_encoder", width, config_.recurrent_width, rng);
  user_encoder_ = nn::Mlp2("user_encoder", width, config_.feature_width, config_.feature_width, rng);
  for (std::size_t l = 0; l < config_.graph_layers; ++l) {
    const std::string name = "graph" + std::to_string(l);
    if (config_.variant == GraphVariant::EdgeConv)
      edge_layers_.emplace_back(name, config_.feature_width, config_.edge_hidden_width, rng);
    else if (config_.variant == GraphVariant::Aggregation)
      agg_layers_.emplace_back(name, config_.feature_width, config_.edge_hidden_width, rng);
  }
  head_ = nn::Linear("q_head", config_.feature_width, env::kNumDirections, rng);
}

Var PolicyNetwork::encode_uav_nodes(Tape& tape, Var uav_inputs, Var hidden) {
  require(uav_inputs.cols() == input_width(), "uav observation rows have the wrong width");
  return uav_encoder_.forward(tape, uav_inputs, hidden);
}

Var PolicyNetwork::encode_user_nodes(Tape& tape, Var user_inputs) {
  require(user_inputs.cols() == input_width(), "user observation rows have the wrong width");
  return user_encoder_.forward(tape, user_inputs);
}

Var PolicyNetwork::propagate(Tape& tape, Var nodes, const nn::NeighborList& graph) {
  return propagate(tape, nodes, graph, nodes.rows());
}

Var PolicyNetwork::propagate(Tape& tape, Var nodes, const nn::NeighborList& graph, std::size_t rows) {
  Var x = nodes;
  const std::size_t layers = config_.variant == GraphVariant::EdgeConv ? edge_layers_.size() : agg_layers_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out_rows = l + 1 == layers ? rows : x.rows();
    switch (config_.variant) {
      case GraphVariant::EdgeConv: {
        // Residual stacking: an isolated node keeps its own encoding.
        const Var own = out_rows == x.rows() ? x : slice_rows(x, 0, out_rows);
        x = add(own, edge_layers_[l].forward(tape, x, graph, out_rows));
        break;
      }
      case GraphVariant::Aggregation:
        x = agg_layers_[l].forward(tape, x, graph, out_rows);
        break;
      case GraphVariant::None:
        break;
    }
  }
  return x;
}

PolicyNetwork::Output PolicyNetwork::forward(Tape& tape, const PolicyBatch& batch, Var hidden) {
  require(batch.num_uavs == num_uavs_ && batch.num_users == num_users_, [&] { return
          "observation dimensions do not match the policy (" + std::to_string(batch.num_uavs) + " UAVs, " +
              std::to_string(batch.num_users) + " users vs " + std::to_string(num_uavs_) + ", " +
              std::to_string(num_users_) + ")"; });
  require(hidden.rows() == batch.batch * num_uavs_ && hidden.cols() == config_.recurrent_width,
          "hidden state must hold one row per UAV node");
  const std::size_t uav_rows = batch.batch * num_uavs_;
  const Var uav_features = encode_uav_nodes(tape, tape.constant(batch.uav_inputs), hidden);
  Var final_features = uav_features;
  if (config_.variant != GraphVariant::None) {
    const Var user_features = encode_user_nodes(tape, tape.constant(batch.user_inputs));
    const Var nodes = nn::concat_rows({uav_features, user_features});
    final_features = propagate(tape, nodes, batch.graph, uav_rows);
  }
  return Output{head_.forward(tape, final_features), uav_features};
}

QResult PolicyNetwork::q_values(const env::ObservationSet& observation, const Tensor& hidden) {
  Tape tape(false);
  const PolicyBatch batch = PolicyBatch::build(observation, scaling_);
  const Output out = forward(tape, batch, tape.constant(hidden));
  return QResult{out.q.value(), out.hidden.value()};
}

Tensor PolicyNetwork::initial_hidden(std::size_t batch) const {
  return Tensor({batch * num_uavs_, config_.recurrent_width});
}

nn::ParameterList PolicyNetwork::parameters() {
  nn::ParameterList out;
  uav_encoder_.collect(out);
  user_encoder_.collect(out);
  for (auto& l : edge_layers_) l.collect(out);
  for (auto& l : agg_layers_) l.collect(out);
  head_.collect(out);
  return out;
}

std::size_t argmax_row(const Tensor& q, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < q.cols(); ++c)
    if (q(row, c) > q(row, best)) best = c;
  return best;
}

env::JointAction select_actions(const Tensor& q, double epsilon, nn::Rng& rng) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  require(q.cols() == env::kNumDirections, "Q matrix must have one column per direction");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> direction(0, static_cast<int>(env::kNumDirections) - 1);
  env::JointAction action;
  action.directions.resize(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const bool explore = coin(rng) < epsilon;
    action.directions[i] = static_cast<std::uint8_t>(explore ? direction(rng) : argmax_row(q, i));
  }
  return action;
}

}  // namespace qedgix::encoder
