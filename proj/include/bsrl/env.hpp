#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/scenario.hpp"
#include "bsrl/sim.hpp"

namespace bsrl {

// Flat observation: [normalized clock, station fills, vehicle blocks with the
// acting vehicle first]. Each vehicle block is [one-hot last station, one-hot
// destination, load fraction, time-to-decision fraction, remaining-ops
// fraction, phase flag]. Every entry lies in [0, 1].
inline int state_dim(int station_count, int vehicle_count) {
  return 1 + station_count + vehicle_count * (2 * station_count + 4);
}

inline std::vector<double> observe(const SimState& sim, int acting_vehicle) {
  const int n = sim.network().station_count;
  const int v_count = sim.fleet().vehicle_count;
  const double horizon = sim.horizon_end() - sim.horizon_start();
  std::vector<double> x;
  x.reserve(state_dim(n, v_count));
  x.push_back((sim.clock() - sim.horizon_start()) / horizon);
  for (int i = 0; i < n; ++i)
    x.push_back(static_cast<double>(sim.station_inventory()[i]) /
                sim.network().capacities[i]);
  auto push_block = [&](int v) {
    const VehicleStatus& veh = sim.vehicles()[v];
    for (int i = 0; i < n; ++i) x.push_back(i == veh.last_station ? 1.0 : 0.0);
    for (int i = 0; i < n; ++i) x.push_back(i == veh.destination ? 1.0 : 0.0);
    const double cap = sim.fleet().capacities[v];
    x.push_back(veh.load / cap);
    x.push_back(std::clamp((veh.next_decision - sim.clock()) / horizon, 0.0, 1.0));
    x.push_back(veh.remaining_ops / cap);
    x.push_back(static_cast<double>(veh.phase));
  };
  if (v_count > 0) {
    push_block(acting_vehicle);
    for (int v = 0; v < v_count; ++v)
      if (v != acting_vehicle) push_block(v);
  }
  return x;
}

// Signed bike count per fill level: the vehicle moves the station toward
// round(mu*C), limited by its own free capacity when picking up and by its
// load when dropping off.
inline std::array<int, 3> feasible_inventory_actions(const SimState& sim,
                                                     int vehicle) {
  const VehicleStatus& veh = sim.vehicles()[vehicle];
  const int station = veh.destination;
  const int d = sim.station_inventory()[station];
  const int station_cap = sim.network().capacities[station];
  const int vehicle_cap = sim.fleet().capacities[vehicle];
  std::array<int, 3> actions{};
  for (int k = 0; k < 3; ++k) {
    const int target = round_half_up(sim.fill_levels()[k] * station_cap);
    if (target < d)
      actions[k] = std::min(vehicle_cap - veh.load, d - target);
    else if (target > d)
      actions[k] = std::max(-veh.load, d - target);
    else
      actions[k] = 0;
  }
  return actions;
}

// True for every station the vehicle may head to next: not where it stands,
// not where any other vehicle stands or is heading.
inline std::vector<char> feasible_routing_actions(const SimState& sim,
                                                  int vehicle) {
  const int n = sim.network().station_count;
  std::vector<char> mask(n, 1);
  mask[sim.vehicles()[vehicle].destination] = 0;
  for (int w = 0; w < sim.fleet().vehicle_count; ++w)
    if (w != vehicle) mask[sim.vehicles()[w].destination] = 0;
  return mask;
}

struct TransitionSample {
  DecisionType type = DecisionType::Inventory;
  std::vector<double> state;
  int action = -1;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<char> next_feasible;  // empty exactly on terminal samples
  bool terminal = false;
};

struct EnvOptions {
  // Joint mode serves the RSIR baseline: one 3*|N| action decided at vehicle
  // arrival; the routing half is latched and applied at operation completion
  // (falling back to the nearest feasible station if it became blocked).
  bool joint_mode = false;
  // Window rewards between same-type states of the same vehicle instead of
  // globally across the fleet.
  bool per_vehicle_windows = false;
  SimOptions sim;
};

// Wraps one simulated episode as an MDP with two reward streams. A stream's
// reward window runs between consecutive decision states of its type; demand
// lost before a stream's first state is folded into its first window, and
// the last window of each stream stretches to the horizon end, so each
// stream's rewards sum to the negated episode lost demand.
class Environment {
 public:
  Environment(const StationNetwork& network, const FleetConfig& fleet,
              const EpisodeConfig& episode, DemandScenario day,
              std::uint64_t seed, EnvOptions options = {})
      : network_(network),
        fleet_(fleet),
        episode_(episode),
        day_(std::move(day)),
        seed_(seed),
        options_(options) {}

  struct StepResult {
    std::vector<TransitionSample> transitions;
    bool done = false;
  };

  StepResult reset() {
    sim_.emplace(network_, fleet_, episode_, day_, seed_, options_.sim);
    done_ = false;
    fallback_count_ = 0;
    latched_.assign(fleet_.vehicle_count, -1);
    const int stream_count =
        (options_.joint_mode ? 1 : 2) *
        (options_.per_vehicle_windows ? std::max(fleet_.vehicle_count, 1) : 1);
    pending_.assign(stream_count, std::nullopt);
    carried_.assign(stream_count, 0);
    const std::vector<double> initial = observe(*sim_, 0);
    for (auto& p : pending_) p = Pending{initial, -1, 0, 0, true};
    return advance_loop();
  }

  StepResult step(int action) {
    if (done_ || !decision_)
      throw InternalError("step called with no pending decision");
    const DecisionPoint dp = *decision_;
    if (action < 0 || action >= static_cast<int>(mask_.size()) ||
        !mask_[action])
      throw ConfigError("action " + std::to_string(action) +
                        " is infeasible at this decision point");
    const int s = stream_index(dp.decision_type, dp.vehicle);
    pending_[s] = Pending{state_, action, carried_[s], dp.vehicle, false};
    if (options_.joint_mode && dp.decision_type == DecisionType::Inventory) {
      const int n = network_.station_count;
      const int fill = action / n;
      const int station = action % n;
      sim_->apply_inventory_action(
          dp.vehicle, feasible_inventory_actions(*sim_, dp.vehicle)[fill]);
      latched_[dp.vehicle] = station;
    } else if (dp.decision_type == DecisionType::Inventory) {
      sim_->apply_inventory_action(
          dp.vehicle, feasible_inventory_actions(*sim_, dp.vehicle)[action]);
    } else {
      sim_->apply_routing_action(dp.vehicle, action);
    }
    decision_.reset();
    return advance_loop();
  }

  // Apply a rule-supplied signed bike count at an inventory decision without
  // opening a reward record; the stream stays silent, as if the rule were
  // part of the plant. Used by agents that learn only the other decision.
  StepResult step_scripted_inventory(int signed_count) {
    if (done_ || !decision_)
      throw InternalError("step called with no pending decision");
    if (decision_->decision_type != DecisionType::Inventory)
      throw InternalError("scripted inventory action at a routing decision");
    sim_->apply_inventory_action(decision_->vehicle, signed_count);
    decision_.reset();
    return advance_loop();
  }

  StepResult step_scripted_routing(int station) {
    if (done_ || !decision_)
      throw InternalError("step called with no pending decision");
    if (decision_->decision_type != DecisionType::Routing)
      throw InternalError("scripted routing action at an inventory decision");
    sim_->apply_routing_action(decision_->vehicle, station);
    decision_.reset();
    return advance_loop();
  }

  bool done() const { return done_; }
  const DecisionPoint& decision() const {
    if (!decision_) throw InternalError("no pending decision");
    return *decision_;
  }
  const std::vector<double>& state() const { return state_; }
  const std::vector<char>& mask() const { return mask_; }

  int action_dim(DecisionType type) const {
    if (options_.joint_mode) return 3 * network_.station_count;
    return type == DecisionType::Inventory ? 3 : network_.station_count;
  }

  std::pair<long, long> lost() const { return sim_->lost_demand(); }
  long fallback_count() const { return fallback_count_; }
  const SimState& sim() const { return *sim_; }

 private:
  struct Pending {
    std::vector<double> state;
    int action = -1;
    long snapshot = 0;
    int vehicle = 0;
    bool sentinel = false;
  };

  int stream_index(DecisionType type, int vehicle) const {
    const int type_idx =
        options_.joint_mode ? 0 : (type == DecisionType::Inventory ? 0 : 1);
    if (!options_.per_vehicle_windows) return type_idx;
    return type_idx * fleet_.vehicle_count + vehicle;
  }

  long lost_total() const {
    const auto [rentals, returns] = sim_->lost_demand();
    return rentals + returns;
  }

  StepResult advance_loop() {
    StepResult result;
    for (;;) {
      std::optional<DecisionPoint> dp = sim_->advance_to_next_decision();
      if (!dp) {
        finish(result.transitions);
        result.done = true;
        done_ = true;
        return result;
      }
      if (options_.joint_mode &&
          dp->decision_type == DecisionType::Routing) {
        apply_latched_routing(dp->vehicle);
        continue;
      }
      open_decision(*dp, result.transitions);
      return result;
    }
  }

  // Close the stream the new decision belongs to. A closing sentinel emits
  // nothing but hands its loss snapshot to the record that opens next, which
  // is how pre-first-window losses stay accounted for.
  void open_decision(const DecisionPoint& dp,
                     std::vector<TransitionSample>& out) {
    decision_ = dp;
    state_ = observe(*sim_, dp.vehicle);
    mask_ = decision_mask(dp);
    const int s = stream_index(dp.decision_type, dp.vehicle);
    if (pending_[s]) {
      const Pending& p = *pending_[s];
      if (p.sentinel) {
        carried_[s] = p.snapshot;
      } else {
        out.push_back({dp.decision_type, p.state, p.action,
                       -static_cast<double>(lost_total() - p.snapshot), state_,
                       mask_, false});
        carried_[s] = lost_total();
      }
      pending_[s].reset();
    } else {
      carried_[s] = lost_total();
    }
  }

  std::vector<char> decision_mask(const DecisionPoint& dp) const {
    if (dp.decision_type == DecisionType::Routing)
      return feasible_routing_actions(*sim_, dp.vehicle);
    if (!options_.joint_mode) return std::vector<char>(3, 1);
    const auto routing = feasible_routing_actions(*sim_, dp.vehicle);
    std::vector<char> mask(3 * network_.station_count);
    for (int fill = 0; fill < 3; ++fill)
      for (int n = 0; n < network_.station_count; ++n)
        mask[fill * network_.station_count + n] = routing[n];
    return mask;
  }

  void apply_latched_routing(int vehicle) {
    const int latched = latched_[vehicle];
    if (latched < 0)
      throw InternalError("vehicle " + std::to_string(vehicle) +
                          " reached departure without a latched destination");
    const auto mask = feasible_routing_actions(*sim_, vehicle);
    int dest = latched;
    if (!mask[dest]) {
      const int from = sim_->vehicles()[vehicle].destination;
      dest = -1;
      double best = 0.0;
      for (int n = 0; n < network_.station_count; ++n) {
        if (!mask[n]) continue;
        const double dist = network_.distance[from][n];
        if (dest < 0 || dist < best) {
          dest = n;
          best = dist;
        }
      }
      if (dest < 0)
        throw InternalError("no feasible fallback destination for vehicle " +
                            std::to_string(vehicle));
      ++fallback_count_;
    }
    sim_->apply_routing_action(vehicle, dest);
  }

  void finish(std::vector<TransitionSample>& out) {
    for (auto& slot : pending_) {
      if (!slot || slot->sentinel) {
        slot.reset();
        continue;
      }
      const Pending& p = *slot;
      const DecisionType type = options_.joint_mode
                                    ? DecisionType::Inventory
                                    : stream_type(&slot - pending_.data());
      out.push_back({type, p.state, p.action,
                     -static_cast<double>(lost_total() - p.snapshot),
                     observe(*sim_, p.vehicle), {}, true});
      slot.reset();
    }
  }

  DecisionType stream_type(std::ptrdiff_t index) const {
    if (options_.joint_mode) return DecisionType::Inventory;
    const int per_type =
        options_.per_vehicle_windows ? fleet_.vehicle_count : 1;
    return index < per_type ? DecisionType::Inventory : DecisionType::Routing;
  }

  const StationNetwork& network_;
  const FleetConfig& fleet_;
  EpisodeConfig episode_;
  DemandScenario day_;
  std::uint64_t seed_;
  EnvOptions options_;
  std::optional<SimState> sim_;
  std::optional<DecisionPoint> decision_;
  std::vector<double> state_;
  std::vector<char> mask_;
  std::vector<std::optional<Pending>> pending_;
  std::vector<long> carried_;
  std::vector<int> latched_;
  long fallback_count_ = 0;
  bool done_ = false;
};

}  // namespace bsrl
