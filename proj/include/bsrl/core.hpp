#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsrl/common.hpp"

namespace bsrl {

// Station network: dock capacities, planar coordinates (km), pairwise
// distances (km) and vehicle transit times (minutes). Immutable after
// construction.
struct StationNetwork {
  int station_count = 0;
  std::vector<int> capacities;
  std::vector<std::array<double, 2>> coordinates;
  std::vector<std::vector<double>> distance;
  std::vector<std::vector<double>> transit_time;
};

struct FleetConfig {
  int vehicle_count = 0;
  std::vector<int> capacities;
  std::vector<int> initial_inventory;
  std::vector<int> initial_station;
  double handling_time = 0.5;  // minutes per bike loaded or unloaded
};

struct EpisodeConfig {
  double horizon_start = 420.0;  // clock minutes since midnight
  double horizon_end = 660.0;
  std::vector<int> initial_station_inventory;
  std::array<double, 3> fill_levels{0.2, 0.5, 0.8};
};

enum class GridLayout { GT1, GT2 };

inline std::string to_string(GridLayout layout) {
  return layout == GridLayout::GT1 ? "GT1" : "GT2";
}

inline GridLayout parse_layout(const std::string& s) {
  if (s == "GT1" || s == "gt1") return GridLayout::GT1;
  if (s == "GT2" || s == "gt2") return GridLayout::GT2;
  throw ConfigError("unknown layout '" + s + "' (expected GT1 or GT2)");
}

namespace detail {

inline void fill_matrices(StationNetwork& net, double vehicle_speed) {
  const int n = net.station_count;
  net.distance.assign(n, std::vector<double>(n, 0.0));
  net.transit_time.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = net.coordinates[i][0] - net.coordinates[j][0];
      const double dy = net.coordinates[i][1] - net.coordinates[j][1];
      const double d = std::sqrt(dx * dx + dy * dy);
      net.distance[i][j] = net.distance[j][i] = d;
      net.transit_time[i][j] = net.transit_time[j][i] = d / vehicle_speed;
    }
  }
}

// rejects positions closer than 1 m to anything already placed
inline std::array<double, 2> draw_position(
    Rng& rng, const std::vector<std::array<double, 2>>& taken,
    double cx, double cy, double radius, bool in_disc, double extent) {
  for (;;) {
    std::array<double, 2> p;
    if (in_disc) {
      const double r = radius * std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      p = {cx + r * std::cos(a), cy + r * std::sin(a)};
    } else {
      p = {rng.uniform(0.0, extent), rng.uniform(0.0, extent)};
    }
    bool ok = true;
    for (const auto& q : taken) {
      const double dx = p[0] - q[0];
      const double dy = p[1] - q[1];
      if (dx * dx + dy * dy < 1e-6) {
        ok = false;
        break;
      }
    }
    if (ok) return p;
  }
}

}  // namespace detail

// 60-station synthetic city. GT1 clusters 9 high-capacity stations around a
// single center; GT2 splits 12 high-capacity stations across two centers.
// Remaining stations are scattered uniformly over a 10x10 km square.
// Deterministic for a fixed (layout, seed).
inline StationNetwork build_grid_network(GridLayout layout, std::uint64_t seed,
                                         double vehicle_speed = 0.5) {
  constexpr int kStations = 60;
  constexpr int kCenterCapacity = 40;
  constexpr int kOutskirtCapacity = 20;
  constexpr double kExtent = 10.0;
  constexpr double kClusterRadius = 1.5;

  Rng rng(substream(seed, "network", layout == GridLayout::GT1 ? 1 : 2));
  StationNetwork net;
  net.station_count = kStations;
  net.capacities.assign(kStations, kOutskirtCapacity);

  std::vector<std::array<double, 2>> centers;
  int center_stations = 0;
  if (layout == GridLayout::GT1) {
    centers = {{5.0, 5.0}};
    center_stations = 9;
  } else {
    centers = {{2.5, 5.0}, {7.5, 5.0}};
    center_stations = 12;
  }
  const int per_cluster = center_stations / static_cast<int>(centers.size());

  net.coordinates.reserve(kStations);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int k = 0; k < per_cluster; ++k) {
      net.coordinates.push_back(detail::draw_position(
          rng, net.coordinates, centers[c][0], centers[c][1], kClusterRadius,
          true, kExtent));
    }
  }
  for (int i = 0; i < center_stations; ++i) net.capacities[i] = kCenterCapacity;
  while (static_cast<int>(net.coordinates.size()) < kStations) {
    net.coordinates.push_back(
        detail::draw_position(rng, net.coordinates, 0, 0, 0, false, kExtent));
  }

  detail::fill_matrices(net, vehicle_speed);
  return net;
}

// Small uniform-capacity network for experiments and tests.
inline StationNetwork build_random_network(int station_count, int capacity,
                                           double extent, std::uint64_t seed,
                                           double vehicle_speed = 0.5) {
  if (station_count < 1) throw ConfigError("station_count must be >= 1");
  Rng rng(substream(seed, "network-random"));
  StationNetwork net;
  net.station_count = station_count;
  net.capacities.assign(station_count, capacity);
  net.coordinates.reserve(station_count);
  for (int i = 0; i < station_count; ++i) {
    net.coordinates.push_back(
        detail::draw_position(rng, net.coordinates, 0, 0, 0, false, extent));
  }
  detail::fill_matrices(net, vehicle_speed);
  return net;
}

// Fleet of identical vehicles parked at stations 0..count-1.
inline FleetConfig make_uniform_fleet(int vehicle_count, int capacity,
                                      int initial_inventory = 0,
                                      double handling_time = 0.5) {
  FleetConfig fleet;
  fleet.vehicle_count = vehicle_count;
  fleet.capacities.assign(vehicle_count, capacity);
  fleet.initial_inventory.assign(vehicle_count, initial_inventory);
  fleet.initial_station.resize(vehicle_count);
  for (int v = 0; v < vehicle_count; ++v) fleet.initial_station[v] = v;
  fleet.handling_time = handling_time;
  return fleet;
}

inline std::vector<int> half_fill_inventory(const StationNetwork& net) {
  std::vector<int> d(net.station_count);
  for (int n = 0; n < net.station_count; ++n)
    d[n] = round_half_up(net.capacities[n] / 2.0);
  return d;
}

// All invariant violations at once, as human-readable strings naming the
// offending index. Empty result means the configuration is consistent.
inline std::vector<std::string> validate(const StationNetwork& net,
                                         const FleetConfig& fleet,
                                         const EpisodeConfig& episode) {
  std::vector<std::string> out;
  auto fail = [&out](const std::string& msg) { out.push_back(msg); };

  const int n = net.station_count;
  if (n < 1) fail("network: station_count must be >= 1");
  if (static_cast<int>(net.capacities.size()) != n)
    fail("network: capacities size mismatch");
  if (static_cast<int>(net.distance.size()) != n ||
      static_cast<int>(net.transit_time.size()) != n)
    fail("network: matrix size mismatch");
  for (int i = 0; i < n && i < static_cast<int>(net.capacities.size()); ++i) {
    if (net.capacities[i] < 1)
      fail("network: station " + std::to_string(i) + " capacity < 1");
  }
  if (static_cast<int>(net.distance.size()) == n) {
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(net.distance[i].size()) != n) {
        fail("network: distance row " + std::to_string(i) + " size mismatch");
        continue;
      }
      if (net.distance[i][i] != 0.0)
        fail("network: distance diagonal nonzero at " + std::to_string(i));
      for (int j = 0; j < n; ++j) {
        if (std::abs(net.distance[i][j] - net.distance[j][i]) > 1e-12)
          fail("network: distance asymmetric at (" + std::to_string(i) + "," +
               std::to_string(j) + ")");
      }
    }
    // triangle inequality, 1e-9 slack
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (net.distance[i][j] >
              net.distance[i][k] + net.distance[k][j] + 1e-9) {
            fail("network: triangle inequality violated at (" +
                 std::to_string(i) + "," + std::to_string(j) + "," +
                 std::to_string(k) + ")");
            // one report per (i,j) is enough
            break;
          }
  }

  const int v = fleet.vehicle_count;
  if (v < 0) fail("fleet: vehicle_count must be >= 0");
  if (static_cast<int>(fleet.capacities.size()) != v ||
      static_cast<int>(fleet.initial_inventory.size()) != v ||
      static_cast<int>(fleet.initial_station.size()) != v)
    fail("fleet: per-vehicle array size mismatch");
  if (fleet.handling_time <= 0.0) fail("fleet: handling_time must be > 0");
  for (int i = 0; i < v && i < static_cast<int>(fleet.capacities.size()); ++i) {
    if (fleet.capacities[i] < 1)
      fail("fleet: vehicle " + std::to_string(i) + " capacity < 1");
    if (fleet.initial_inventory[i] < 0 ||
        fleet.initial_inventory[i] > fleet.capacities[i])
      fail("fleet: vehicle " + std::to_string(i) +
           " initial inventory outside [0, capacity]");
    if (fleet.initial_station[i] < 0 || fleet.initial_station[i] >= n)
      fail("fleet: vehicle " + std::to_string(i) + " initial station invalid");
    for (int j = 0; j < i; ++j) {
      if (fleet.initial_station[i] == fleet.initial_station[j])
        fail("fleet: vehicles " + std::to_string(j) + " and " +
             std::to_string(i) + " share an initial station");
    }
  }

  if (!(episode.horizon_end > episode.horizon_start))
    fail("episode: horizon_end must exceed horizon_start");
  if (static_cast<int>(episode.initial_station_inventory.size()) != n)
    fail("episode: initial_station_inventory size mismatch");
  for (int i = 0;
       i < n && i < static_cast<int>(episode.initial_station_inventory.size());
       ++i) {
    if (episode.initial_station_inventory[i] < 0 ||
        episode.initial_station_inventory[i] > net.capacities[i])
      fail("episode: station " + std::to_string(i) +
           " initial inventory outside [0, capacity]");
  }
  if (!(episode.fill_levels[0] < episode.fill_levels[1] &&
        episode.fill_levels[1] < episode.fill_levels[2]))
    fail("episode: fill levels must be strictly increasing");
  for (double mu : episode.fill_levels)
    if (mu < 0.0 || mu > 1.0) fail("episode: fill level outside [0,1]");

  return out;
}

// ---- JSON serialization (schema version 1) ----

inline void to_json(nlohmann::json& j, const StationNetwork& net) {
  j = nlohmann::json{{"station_count", net.station_count},
                     {"capacities", net.capacities},
                     {"coordinates", net.coordinates},
                     {"distance", net.distance},
                     {"transit_time", net.transit_time}};
}

inline void from_json(const nlohmann::json& j, StationNetwork& net) {
  j.at("station_count").get_to(net.station_count);
  j.at("capacities").get_to(net.capacities);
  j.at("coordinates").get_to(net.coordinates);
  j.at("distance").get_to(net.distance);
  j.at("transit_time").get_to(net.transit_time);
}

inline void to_json(nlohmann::json& j, const FleetConfig& fleet) {
  j = nlohmann::json{{"vehicle_count", fleet.vehicle_count},
                     {"capacities", fleet.capacities},
                     {"initial_inventory", fleet.initial_inventory},
                     {"initial_station", fleet.initial_station},
                     {"handling_time", fleet.handling_time}};
}

inline void from_json(const nlohmann::json& j, FleetConfig& fleet) {
  j.at("vehicle_count").get_to(fleet.vehicle_count);
  j.at("capacities").get_to(fleet.capacities);
  j.at("initial_inventory").get_to(fleet.initial_inventory);
  j.at("initial_station").get_to(fleet.initial_station);
  j.at("handling_time").get_to(fleet.handling_time);
}

inline void to_json(nlohmann::json& j, const EpisodeConfig& ep) {
  j = nlohmann::json{
      {"horizon_start", ep.horizon_start},
      {"horizon_end", ep.horizon_end},
      {"initial_station_inventory", ep.initial_station_inventory},
      {"fill_levels", ep.fill_levels}};
}

inline void from_json(const nlohmann::json& j, EpisodeConfig& ep) {
  j.at("horizon_start").get_to(ep.horizon_start);
  j.at("horizon_end").get_to(ep.horizon_end);
  j.at("initial_station_inventory").get_to(ep.initial_station_inventory);
  j.at("fill_levels").get_to(ep.fill_levels);
}

struct SystemConfig {
  StationNetwork network;
  FleetConfig fleet;
  EpisodeConfig episode;
};

inline void save_system(const SystemConfig& sys, const std::string& path) {
  nlohmann::json j{{"schema_version", 1},
                   {"network", sys.network},
                   {"fleet", sys.fleet},
                   {"episode", sys.episode}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

inline SystemConfig load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed system file '" + path + "': " + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"] != 1)
    throw DataError("unsupported schema version in '" + path + "'");
  SystemConfig sys;
  try {
    j.at("network").get_to(sys.network);
    j.at("fleet").get_to(sys.fleet);
    j.at("episode").get_to(sys.episode);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad system file '" + path + "': " + e.what());
  }
  return sys;
}

}  // namespace bsrl
