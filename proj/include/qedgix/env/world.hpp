#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qedgix/nn/tensor.hpp"

namespace qedgix::env {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(Point a, Point b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  return dx * dx + dy * dy;
}

/// Scenario parameters. Lengths are kept as multiples of the unit `xi_km`
/// so that configs round-trip exactly; the accessors return kilometres.
struct WorldConfig {
  double area_side_km = 1.0;
  std::size_t num_uavs = 3;
  std::size_t num_users = 6;
  double xi_km = 0.04;
  double speed_xi = 1.0;               // per slot
  double transmission_range_xi = 3.0;
  double detection_range_xi = 7.0;
  std::size_t horizon = 80;
  Point uav_start{0.5, 0.5};
  std::uint64_t user_placement_seed = 0;
  double altitude_m = 50.0;  // documentation only; geometry is planar

  double speed() const { return speed_xi * xi_km; }
  double transmission_range() const { return transmission_range_xi * xi_km; }
  double detection_range() const { return detection_range_xi * xi_km; }
  std::size_t num_nodes() const { return num_uavs + num_users; }
  std::size_t state_width() const { return 2 * num_uavs + 3 * num_users; }

  /// Throws ContractViolation naming the first broken invariant.
  void validate() const;

  friend bool operator==(const WorldConfig&, const WorldConfig&) = default;
};

struct WorldState {
  std::vector<Point> uav_positions;
  std::vector<Point> user_positions;
  std::vector<std::uint32_t> aoi;
  std::size_t slot = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

inline constexpr std::size_t kNumDirections = 8;

/// Heading index d per UAV, meaning an angle of d * 45 degrees.
struct JointAction {
  std::vector<std::uint8_t> directions;
};

/// Unit heading vector for direction index 0..7.
Point heading(std::size_t direction);

/// Node i < M is UAV i, node M + j is user j.
///   uav_obs  : (M+N) x M x 2, relative position of each UAV seen from node i
///   user_obs : (M+N) x N x 3, relative position and AoI of each user
///   adjacency: (M+N) x (M+N), 1 iff i != j and distance <= detection range
struct ObservationSet {
  std::size_t num_uavs = 0;
  std::size_t num_users = 0;
  nn::Tensor uav_obs;
  nn::Tensor user_obs;
  std::vector<std::uint8_t> adjacency;
  /// Each node's own position (UAVs first, then users).
  std::vector<Point> positions;

  std::size_t num_nodes() const { return num_uavs + num_users; }
  bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * num_nodes() + j] != 0; }
  /// Row i flattened: M*2 UAV entries then N*3 user entries.
  std::size_t row_width() const { return 2 * num_uavs + 3 * num_users; }
  const double* uav_row(std::size_t i) const { return uav_obs.data() + i * num_uavs * 2; }
  const double* user_row(std::size_t i) const { return user_obs.data() + i * num_users * 3; }
};

WorldState reset(const WorldConfig& config, std::uint64_t seed);
void move_uavs(WorldState& state, const JointAction& action, const WorldConfig& config);
void update_aoi(WorldState& state, const WorldConfig& config);

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
};

/// Move, cover-test and advance the slot; reward is minus the summed AoI
/// after the update.
StepOutcome step(WorldState& state, const JointAction& action, const WorldConfig& config);

ObservationSet build_observations(const WorldState& state, const WorldConfig& config);

/// 1 x (2M + 3N): UAV coordinates / area, user coordinates / area, AoI / K.
nn::Tensor global_state_vector(const WorldState& state, const WorldConfig& config);

/// Mean AoI over users for one state.
double mean_aoi(const WorldState& state);

/// Convenience owner of a config and its evolving state.
class Environment {
 public:
  explicit Environment(WorldConfig config);

  const WorldConfig& config() const { return config_; }
  const WorldState& state() const { return state_; }

  void reset(std::uint64_t seed);
  StepOutcome step(const JointAction& action);
  ObservationSet observations() const { return build_observations(state_, config_); }
  nn::Tensor global_state() const { return global_state_vector(state_, config_); }
  bool done() const { return state_.slot >= config_.horizon; }

 private:
  WorldConfig config_;
  WorldState state_;
};

}  // namespace qedgix::env
