#include "qedgix/env/scenario_io.hpp"

#include <fstream>
#include <set>

#include "qedgix/error.hpp"

namespace qedgix::env {

namespace {

const std::set<std::string> kScenarioKeys = {
    "area_side_km", "num_uavs",  "num_users", "xi_km",    "speed_xi",  "transmission_range_xi",
    "detection_range_xi", "horizon", "seed", "uav_start", "altitude_m"};

template <class T>
T read_value(const nlohmann::json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(key, "expected an integer");
      if (it->is_number_integer() && !it->is_number_unsigned() && it->get<long long>() < 0)
        throw ConfigError(key, "must not be negative");
    } else {
      if (!it->is_number()) throw ConfigError(key, "expected a number");
    }
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

WorldConfig scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<scenario>", "expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kScenarioKeys.contains(key)) throw ConfigError(key, "unknown scenario key");

  WorldConfig c;
  c.area_side_km = read_value(j, "area_side_km", c.area_side_km);
  c.num_uavs = read_value(j, "num_uavs", c.num_uavs);
  c.num_users = read_value(j, "num_users", c.num_users);
  c.xi_km = read_value(j, "xi_km", c.xi_km);
  c.speed_xi = read_value(j, "speed_xi", c.speed_xi);
  c.transmission_range_xi = read_value(j, "transmission_range_xi", c.transmission_range_xi);
  c.detection_range_xi = read_value(j, "detection_range_xi", c.detection_range_xi);
  c.horizon = read_value(j, "horizon", c.horizon);
  c.user_placement_seed = read_value(j, "seed", c.user_placement_seed);
  c.altitude_m = read_value(j, "altitude_m", c.altitude_m);
  if (auto it = j.find("uav_start"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      throw ConfigError("uav_start", "expected [x, y]");
    c.uav_start = Point{(*it)[0].get<double>(), (*it)[1].get<double>()};
  }

  // Map each invariant to the key a user has to fix.
  const auto check = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  check(c.area_side_km > 0.0, "area_side_km", "must be positive");
  check(c.num_uavs >= 1, "num_uavs", "must be at least 1");
  check(c.num_uavs <= c.num_users, "num_uavs", "must not exceed num_users");
  check(c.xi_km > 0.0, "xi_km", "must be positive");
  check(c.speed_xi > 0.0, "speed_xi", "must be positive");
  check(c.transmission_range_xi > 0.0, "transmission_range_xi", "must be positive");
  check(c.detection_range_xi >= c.transmission_range_xi, "detection_range_xi",
        "must be at least transmission_range_xi");
  check(c.horizon > 0, "horizon", "must be positive");
  check(c.uav_start.x >= 0.0 && c.uav_start.x <= c.area_side_km && c.uav_start.y >= 0.0 &&
            c.uav_start.y <= c.area_side_km,
        "uav_start", "must lie inside the area");
  return c;
}

nlohmann::json scenario_to_json(const WorldConfig& c) {
  return nlohmann::json{{"area_side_km", c.area_side_km},
                        {"num_uavs", c.num_uavs},
                        {"num_users", c.num_users},
                        {"xi_km", c.xi_km},
                        {"speed_xi", c.speed_xi},
                        {"transmission_range_xi", c.transmission_range_xi},
                        {"detection_range_xi", c.detection_range_xi},
                        {"horizon", c.horizon},
                        {"seed", c.user_placement_seed},
                        {"uav_start", {c.uav_start.x, c.uav_start.y}},
                        {"altitude_m", c.altitude_m}};
}

WorldConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<scenario>", std::string("parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

void save_scenario(const std::filesystem::path& path, const WorldConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scenario file '" + path.string() + "'");
  out << scenario_to_json(config).dump(2) << '\n';
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory file '" + path.string() + "'");
  out.precision(17);
  out << "slot,entity_kind,entity_id,x_km,y_km,aoi\n";
  const std::size_t slots = trajectory.states.empty() ? 0 : trajectory.states.size() - 1;
  for (std::size_t k = 0; k < slots; ++k) {
    const WorldState& s = trajectory.states[k];
    for (std::size_t j = 0; j < s.uav_positions.size(); ++j)
      out << k << ",uav," << j << ',' << s.uav_positions[j].x << ',' << s.uav_positions[j].y << ",\n";
    for (std::size_t i = 0; i < s.user_positions.size(); ++i)
      out << k << ",user," << i << ',' << s.user_positions[i].x << ',' << s.user_positions[i].y << ',' << s.aoi[i]
          << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

double trajectory_mean_aoi(const Trajectory& trajectory) {
  if (trajectory.states.size() < 2) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < trajectory.states.size(); ++k) {
    for (auto a : trajectory.states[k].aoi) total += a;
    count += trajectory.states[k].aoi.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace qedgix::env
