#include "qedgix/env/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qedgix/error.hpp"

namespace qedgix::env {

void WorldConfig::validate() const {
  require(area_side_km > 0.0, "area_side_km must be positive");
  require(num_uavs >= 1, "num_uavs must be at least 1");
  require(num_uavs <= num_users, "num_uavs must not exceed num_users");
  require(xi_km > 0.0, "xi_km must be positive");
  require(speed_xi > 0.0, "speed_xi must be positive");
  require(transmission_range_xi > 0.0, "transmission_range_xi must be positive");
  require(detection_range_xi >= transmission_range_xi, "detection_range_xi must be >= transmission_range_xi");
  require(horizon > 0, "horizon must be positive");
  require(uav_start.x >= 0.0 && uav_start.x <= area_side_km && uav_start.y >= 0.0 && uav_start.y <= area_side_km,
          "uav_start must lie inside the area");
}

Point heading(std::size_t direction) {
  static constexpr double kDiag = 0.70710678118654752440;
  static constexpr std::array<Point, kNumDirections> kHeadings{{
      {1.0, 0.0},
      {kDiag, kDiag},
      {0.0, 1.0},
      {-kDiag, kDiag},
      {-1.0, 0.0},
      {-kDiag, -kDiag},
      {0.0, -1.0},
      {kDiag, -kDiag},
  }};
  require(direction < kNumDirections, "direction index out of range");
  return kHeadings[direction];
}

WorldState reset(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState state;
  state.uav_positions.assign(config.num_uavs, config.uav_start);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, config.area_side_km);
  state.user_positions.resize(config.num_users);
  for (auto& p : state.user_positions) {
    p.x = coord(rng);
    p.y = coord(rng);
  }
  state.aoi.assign(config.num_users, 0);
  state.slot = 0;
  return state;
}

void move_uavs(WorldState& state, const JointAction& action, const WorldConfig& config) {
  require(action.directions.size() == state.uav_positions.size(), "joint action must have one direction per UAV");
  const double v = config.speed();
  for (std::size_t j = 0; j < state.uav_positions.size(); ++j) {
    const Point h = heading(action.directions[j]);
    Point& p = state.uav_positions[j];
    p.x = std::clamp(p.x + v * h.x, 0.0, config.area_side_km);
    p.y = std::clamp(p.y + v * h.y, 0.0, config.area_side_km);
  }
}

void update_aoi(WorldState& state, const WorldConfig& config) {
  const double t = config.transmission_range();
  const double t2 = t * t;
  for (std::size_t i = 0; i < state.user_positions.size(); ++i) {
    const bool covered = std::any_of(state.uav_positions.begin(), state.uav_positions.end(),
                                     [&](Point u) { return squared_distance(u, state.user_positions[i]) <= t2; });
    state.aoi[i] = covered ? 0 : state.aoi[i] + 1;
  }
}

StepOutcome step(WorldState& state, const JointAction& action, const WorldConfig& config) {
  require(state.slot < config.horizon, "step called on a finished episode");
  move_uavs(state, action, config);
  update_aoi(state, config);
  ++state.slot;
  double total = 0.0;
  for (auto a : state.aoi) total += a;
  return StepOutcome{-total, state.slot == config.horizon};
}

ObservationSet build_observations(const WorldState& state, const WorldConfig& config) {
  const std::size_t m = state.uav_positions.size();
  const std::size_t n = state.user_positions.size();
  const std::size_t nodes = m + n;
  const double d = config.detection_range();
  const double d2 = d * d;

  ObservationSet obs;
  obs.num_uavs = m;
  obs.num_users = n;
  obs.uav_obs = nn::Tensor({nodes, m, 2});
  obs.user_obs = nn::Tensor({nodes, n, 3});
  obs.adjacency.assign(nodes * nodes, 0);
  obs.positions.reserve(nodes);

  const auto position = [&](std::size_t node) { return node < m ? state.uav_positions[node] : state.user_positions[node - m]; };
  for (std::size_t i = 0; i < nodes; ++i) obs.positions.push_back(position(i));
  for (std::size_t i = 0; i < nodes; ++i) {
    const Point pi = position(i);
    for (std::size_t j = 0; j < nodes; ++j) {
      if (i == j) continue;
      const Point pj = position(j);
      if (squared_distance(pi, pj) > d2) continue;
      obs.adjacency[i * nodes + j] = 1;
      if (j < m) {
        double* entry = obs.uav_obs.data() + (i * m + j) * 2;
        entry[0] = pj.x - pi.x;
        entry[1] = pj.y - pi.y;
      } else {
        double* entry = obs.user_obs.data() + (i * n + (j - m)) * 3;
        entry[0] = pj.x - pi.x;
        entry[1] = pj.y - pi.y;
        entry[2] = static_cast<double>(state.aoi[j - m]);
      }
    }
  }
  return obs;
}

nn::Tensor global_state_vector(const WorldState& state, const WorldConfig& config) {
  const std::size_t m = state.uav_positions.size();
  const std::size_t n = state.user_positions.size();
  nn::Tensor s({1, 2 * m + 3 * n});
  std::size_t k = 0;
  for (const Point& p : state.uav_positions) {
    s[k++] = p.x / config.area_side_km;
    s[k++] = p.y / config.area_side_km;
  }
  for (const Point& p : state.user_positions) {
    s[k++] = p.x / config.area_side_km;
    s[k++] = p.y / config.area_side_km;
  }
  for (auto a : state.aoi) s[k++] = static_cast<double>(a) / static_cast<double>(config.horizon);
  return s;
}

double mean_aoi(const WorldState& state) {
  if (state.aoi.empty()) return 0.0;
  double total = 0.0;
  for (auto a : state.aoi) total += a;
  return total / static_cast<double>(state.aoi.size());
}

Environment::Environment(WorldConfig config) : config_(std::move(config)) {
  config_.validate();
  state_ = env::reset(config_, config_.user_placement_seed);
}

void Environment::reset(std::uint64_t seed) { state_ = env::reset(config_, seed); }

StepOutcome Environment::step(const JointAction& action) { return env::step(state_, action, config_); }

}  // namespace qedgix::env
