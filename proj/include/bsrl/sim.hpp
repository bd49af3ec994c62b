#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/scenario.hpp"

namespace bsrl {

enum class EventKind { RentalRequest, ReturnArrival, VehicleArrival,
                       OperationComplete, Transfer };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::RentalRequest: return "rental";
    case EventKind::ReturnArrival: return "return";
    case EventKind::VehicleArrival: return "arrival";
    case EventKind::OperationComplete: return "complete";
    case EventKind::Transfer: return "transfer";
  }
  return "?";
}

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::RentalRequest;
  int vehicle = -1;
  int station = -1;
  int trip = -1;
  std::int64_t sequence = 0;
};

// Per-vehicle tuple (b, g, p, m, o, i): last/current station, destination or
// current station, load, next decision time, remaining bike moves, and the
// type of the most recently reached decision point (0 inventory, 1 routing).
struct VehicleStatus {
  int last_station = 0;       // b
  int destination = 0;        // g
  int load = 0;               // p
  double next_decision = 0.0; // m
  int remaining_ops = 0;      // o
  int phase = 1;              // i
};

struct SystemState {
  double clock = 0.0;
  std::vector<int> station_inventory;
  std::vector<VehicleStatus> vehicles;
};

enum class DecisionType { Inventory, Routing };

struct DecisionPoint {
  int vehicle = -1;
  DecisionType decision_type = DecisionType::Inventory;
  double clock = 0.0;
  SystemState state_snapshot;
};

struct SimOptions {
  // One bike crosses between station and vehicle at each multiple of the
  // handling time; a move that concurrent demand has made impossible is
  // skipped. The atomic variant moves everything at completion, clamped to
  // the bounds then.
  bool incremental_transfer = true;
  std::ostream* trace = nullptr;  // JSON-lines event log when set
};

class SimState {
 public:
  SimState(const StationNetwork& network, const FleetConfig& fleet,
           const EpisodeConfig& episode, const DemandScenario& day,
           std::uint64_t seed, SimOptions options = {})
      : network_(network),
        fleet_(fleet),
        options_(options),
        trips_(day.trips),
        horizon_start_(episode.horizon_start),
        horizon_end_(episode.horizon_end),
        clock_(episode.horizon_start),
        station_inventory_(episode.initial_station_inventory),
        fill_levels_(episode.fill_levels),
        rng_(substream(seed, "sim", day.day_index)) {
    const auto violations = validate(network, fleet, episode);
    if (!violations.empty()) {
      std::string msg = "invalid episode inputs:";
      for (const auto& v : violations) msg += "\n  " + v;
      throw ConfigError(msg);
    }
    vehicles_.resize(fleet.vehicle_count);
    op_sign_.assign(fleet.vehicle_count, 0);
    op_planned_.assign(fleet.vehicle_count, 0);
    for (int v = 0; v < fleet.vehicle_count; ++v) {
      vehicles_[v].last_station = fleet.initial_station[v];
      vehicles_[v].destination = fleet.initial_station[v];
      vehicles_[v].load = fleet.initial_inventory[v];
      vehicles_[v].next_decision = horizon_start_;
    }
    total_bikes_ = 0;
    for (int d : station_inventory_) total_bikes_ += d;
    for (const auto& v : vehicles_) total_bikes_ += v.load;

    for (int i = 0; i < static_cast<int>(trips_.size()); ++i) {
      if (trips_[i].departure >= horizon_start_ &&
          trips_[i].departure < horizon_end_)
        schedule({trips_[i].departure, EventKind::RentalRequest, -1,
                  trips_[i].origin, i});
    }
    for (int v = 0; v < fleet.vehicle_count; ++v)
      schedule({horizon_start_, EventKind::VehicleArrival, v,
                fleet.initial_station[v], -1});
  }

  // Pops events chronologically until a vehicle needs a decision or the
  // horizon is exhausted. Demand at the horizon boundary still counts;
  // vehicle decisions at or past it do not happen.
  std::optional<DecisionPoint> advance_to_next_decision() {
    if (ended_) throw InternalError("advance called on an ended episode");
    if (awaiting_ >= 0)
      throw InternalError("vehicle " + std::to_string(awaiting_) +
                          " still awaits a decision");
    while (!queue_.empty()) {
      const Event e = queue_.top();
      queue_.pop();
      const bool decision = e.kind == EventKind::VehicleArrival ||
                            e.kind == EventKind::OperationComplete;
      if (e.time > horizon_end_) continue;
      if (decision && e.time >= horizon_end_) continue;
      clock_ = e.time;
      std::optional<DecisionPoint> dp = process(e);
      check_invariants(e);
      trace(e);
      if (dp) {
        awaiting_ = dp->vehicle;
        return dp;
      }
    }
    clock_ = horizon_end_;
    ended_ = true;
    return std::nullopt;
  }

  // signed_count > 0 picks bikes up from the station, < 0 drops them off.
  void apply_inventory_action(int vehicle, int signed_count) {
    require_decision(vehicle, DecisionType::Inventory);
    VehicleStatus& veh = vehicles_[vehicle];
    const int station = veh.destination;
    const int d = station_inventory_[station];
    if (signed_count > 0) {
      if (signed_count > d)
        throw ConfigError("pick up " + std::to_string(signed_count) +
                          " exceeds station inventory " + std::to_string(d));
      if (signed_count > fleet_.capacities[vehicle] - veh.load)
        throw ConfigError("pick up " + std::to_string(signed_count) +
                          " exceeds vehicle free capacity " +
                          std::to_string(fleet_.capacities[vehicle] - veh.load));
    } else if (signed_count < 0) {
      if (-signed_count > veh.load)
        throw ConfigError("drop off " + std::to_string(-signed_count) +
                          " exceeds vehicle load " + std::to_string(veh.load));
      if (-signed_count > network_.capacities[station] - d)
        throw ConfigError("drop off " + std::to_string(-signed_count) +
                          " exceeds station free docks " +
                          std::to_string(network_.capacities[station] - d));
    }
    const int moves = std::abs(signed_count);
    veh.remaining_ops = moves;
    veh.next_decision = clock_ + fleet_.handling_time * moves;
    op_sign_[vehicle] = signed_count > 0 ? 1 : (signed_count < 0 ? -1 : 0);
    op_planned_[vehicle] = signed_count;
    if (options_.incremental_transfer) {
      for (int k = 1; k <= moves; ++k)
        schedule({clock_ + fleet_.handling_time * k, EventKind::Transfer,
                  vehicle, station, -1});
    }
    schedule({veh.next_decision, EventKind::OperationComplete, vehicle,
              station, -1});
    awaiting_ = -1;
  }

  void apply_routing_action(int vehicle, int station) {
    require_decision(vehicle, DecisionType::Routing);
    VehicleStatus& veh = vehicles_[vehicle];
    if (station < 0 || station >= network_.station_count)
      throw ConfigError("routing target " + std::to_string(station) +
                        " is not a station");
    if (station == veh.destination)
      throw ConfigError("vehicle " + std::to_string(vehicle) +
                        " must leave its current station");
    for (int w = 0; w < fleet_.vehicle_count; ++w) {
      if (w != vehicle && vehicles_[w].destination == station)
        throw ConfigError("station " + std::to_string(station) +
                          " is already the destination of vehicle " +
                          std::to_string(w));
    }
    veh.last_station = veh.destination;
    veh.destination = station;
    veh.next_decision =
        clock_ + network_.transit_time[veh.last_station][station];
    schedule({veh.next_decision, EventKind::VehicleArrival, vehicle, station,
              -1});
    awaiting_ = -1;
  }

  std::pair<long, long> lost_demand() const {
    return {lost_rentals_, lost_returns_};
  }

  double clock() const { return clock_; }
  bool ended() const { return ended_; }
  double horizon_start() const { return horizon_start_; }
  double horizon_end() const { return horizon_end_; }
  const std::array<double, 3>& fill_levels() const { return fill_levels_; }
  const StationNetwork& network() const { return network_; }
  const FleetConfig& fleet() const { return fleet_; }
  const std::vector<int>& station_inventory() const {
    return station_inventory_;
  }
  const std::vector<VehicleStatus>& vehicles() const { return vehicles_; }
  long in_transit() const { return in_transit_; }
  long total_bikes() const { return total_bikes_; }

  SystemState snapshot() const { return {clock_, station_inventory_, vehicles_}; }

 private:
  void schedule(Event e) {
    e.sequence = next_sequence_++;
    queue_.push(e);
  }

  void require_decision(int vehicle, DecisionType type) const {
    if (vehicle != awaiting_)
      throw InternalError("vehicle " + std::to_string(vehicle) +
                          " has no pending decision");
    const int want = type == DecisionType::Inventory ? 0 : 1;
    if (vehicles_[vehicle].phase != want)
      throw InternalError("vehicle " + std::to_string(vehicle) +
                          " awaits the other decision type");
  }

  std::optional<DecisionPoint> process(const Event& e) {
    switch (e.kind) {
      case EventKind::RentalRequest: {
        const TripRecord& trip = trips_[e.trip];
        if (station_inventory_[trip.origin] >= 1) {
          --station_inventory_[trip.origin];
          ++in_transit_;
          schedule({trip.arrival, EventKind::ReturnArrival, -1,
                    trip.destination, e.trip});
        } else {
          ++lost_rentals_;
        }
        return std::nullopt;
      }
      case EventKind::ReturnArrival: {
        int target = e.station;
        if (station_inventory_[target] >= network_.capacities[target]) {
          ++lost_returns_;
          target = nearest_free_dock(e.station);
        }
        ++station_inventory_[target];
        --in_transit_;
        return std::nullopt;
      }
      case EventKind::VehicleArrival: {
        VehicleStatus& veh = vehicles_[e.vehicle];
        veh.last_station = veh.destination;
        veh.phase = 0;
        veh.next_decision = clock_;
        return DecisionPoint{e.vehicle, DecisionType::Inventory, clock_,
                             snapshot()};
      }
      case EventKind::OperationComplete: {
        VehicleStatus& veh = vehicles_[e.vehicle];
        if (!options_.incremental_transfer)
          execute_atomic_transfer(e.vehicle);
        veh.remaining_ops = 0;
        veh.phase = 1;
        veh.next_decision = clock_;
        return DecisionPoint{e.vehicle, DecisionType::Routing, clock_,
                             snapshot()};
      }
      case EventKind::Transfer: {
        transfer_one_bike(e.vehicle, e.station);
        return std::nullopt;
      }
    }
    throw InternalError("unknown event kind");
  }

  // Redirection is instantaneous; ties go to the lowest station index.
  int nearest_free_dock(int from) {
    int best = -1;
    double best_dist = 0.0;
    for (int n = 0; n < network_.station_count; ++n) {
      if (station_inventory_[n] >= network_.capacities[n]) continue;
      const double dist = network_.distance[from][n];
      if (best < 0 || dist < best_dist) {
        best = n;
        best_dist = dist;
      }
    }
    if (best < 0)
      throw InternalError(dump_state("no free dock anywhere for a return at "
                                     "station " + std::to_string(from)));
    return best;
  }

  void transfer_one_bike(int vehicle, int station) {
    VehicleStatus& veh = vehicles_[vehicle];
    const int sign = op_sign_[vehicle];
    if (sign > 0) {
      if (station_inventory_[station] >= 1 &&
          veh.load < fleet_.capacities[vehicle]) {
        --station_inventory_[station];
        ++veh.load;
      }
    } else if (sign < 0) {
      if (veh.load >= 1 &&
          station_inventory_[station] < network_.capacities[station]) {
        ++station_inventory_[station];
        --veh.load;
      }
    }
    if (veh.remaining_ops > 0) --veh.remaining_ops;
  }

  void execute_atomic_transfer(int vehicle) {
    VehicleStatus& veh = vehicles_[vehicle];
    const int station = veh.destination;
    const int planned = op_planned_[vehicle];
    if (planned > 0) {
      const int amount = std::min({planned, station_inventory_[station],
                                   fleet_.capacities[vehicle] - veh.load});
      station_inventory_[station] -= amount;
      veh.load += amount;
    } else if (planned < 0) {
      const int amount = std::min(
          {-planned, veh.load,
           network_.capacities[station] - station_inventory_[station]});
      station_inventory_[station] += amount;
      veh.load -= amount;
    }
  }

  void check_invariants(const Event& e) const {
    long total = in_transit_;
    for (int n = 0; n < network_.station_count; ++n) {
      if (station_inventory_[n] < 0 ||
          station_inventory_[n] > network_.capacities[n])
        throw InternalError(dump_state("station " + std::to_string(n) +
                                       " inventory out of bounds after " +
                                       to_string(e.kind)));
      total += station_inventory_[n];
    }
    for (int v = 0; v < fleet_.vehicle_count; ++v) {
      if (vehicles_[v].load < 0 || vehicles_[v].load > fleet_.capacities[v])
        throw InternalError(dump_state("vehicle " + std::to_string(v) +
                                       " load out of bounds after " +
                                       to_string(e.kind)));
      total += vehicles_[v].load;
    }
    if (total != total_bikes_)
      throw InternalError(dump_state("bike conservation broken after " +
                                     to_string(e.kind)));
  }

  std::string dump_state(const std::string& why) const {
    std::ostringstream out;
    out << why << " | clock=" << clock_ << " lost=(" << lost_rentals_ << ","
        << lost_returns_ << ") in_transit=" << in_transit_ << " d=[";
    for (std::size_t n = 0; n < station_inventory_.size(); ++n)
      out << (n ? "," : "") << station_inventory_[n];
    out << "] p=[";
    for (std::size_t v = 0; v < vehicles_.size(); ++v)
      out << (v ? "," : "") << vehicles_[v].load;
    out << "]";
    return out.str();
  }

  void trace(const Event& e) {
    if (!options_.trace) return;
    nlohmann::json payload;
    if (e.vehicle >= 0) payload["vehicle"] = e.vehicle;
    if (e.station >= 0) payload["station"] = e.station;
    if (e.trip >= 0) payload["trip"] = e.trip;
    nlohmann::json rec{{"time", e.time},
                       {"kind", to_string(e.kind)},
                       {"payload", payload},
                       {"lost_rentals", lost_rentals_},
                       {"lost_returns", lost_returns_}};
    *options_.trace << rec.dump() << '\n';
  }

  struct EventAfter {
    static int priority(EventKind k) {
      return k == EventKind::RentalRequest || k == EventKind::ReturnArrival
                 ? 0
                 : 1;
    }
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      const int pa = priority(a.kind), pb = priority(b.kind);
      if (pa != pb) return pa > pb;
      return a.sequence > b.sequence;
    }
  };

  const StationNetwork& network_;
  const FleetConfig& fleet_;
  SimOptions options_;
  std::vector<TripRecord> trips_;
  double horizon_start_;
  double horizon_end_;
  double clock_;
  std::vector<int> station_inventory_;
  std::array<double, 3> fill_levels_;
  std::vector<VehicleStatus> vehicles_;
  std::vector<int> op_sign_;
  std::vector<int> op_planned_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  long lost_rentals_ = 0;
  long lost_returns_ = 0;
  long in_transit_ = 0;
  long total_bikes_ = 0;
  std::int64_t next_sequence_ = 0;
  int awaiting_ = -1;
  bool ended_ = false;
  Rng rng_;
};

}  // namespace bsrl
