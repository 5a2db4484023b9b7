#pragma once

#include <filesystem>
#include <json.hpp>
#include <vector>

#include "qedgix/env/world.hpp"

namespace qedgix::env {

/// Scenario keys: area_side_km, num_uavs, num_users, xi_km, speed_xi,
/// transmission_range_xi, detection_range_xi, horizon, seed, plus the
/// optional uav_start [x, y] and altitude_m. Missing keys take the defaults
/// of WorldConfig; unknown keys and invalid values raise ConfigError.
WorldConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const WorldConfig& config);

WorldConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const WorldConfig& config);

/// States S_0 .. S_K of one episode.
struct Trajectory {
  std::vector<WorldState> states;
};

/// Header `slot,entity_kind,entity_id,x_km,y_km,aoi`; one row per entity for
/// each slot 0..K-1 (the state the policy acted on). UAV rows leave aoi empty.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);

/// Mean of the user AoI over slots 0..K-1, i.e. the value recoverable from the
/// exported CSV.
double trajectory_mean_aoi(const Trajectory& trajectory);

}  // namespace qedgix::env
