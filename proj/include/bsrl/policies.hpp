#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/env.hpp"
#include "bsrl/scenario.hpp"
#include "bsrl/sim.hpp"

namespace bsrl {

struct HeuristicConfig {
  double alpha = 0.5;       // weight on the distance term
  double m_exponent = 1.0;  // 0 = uniform, infinity = greedy
};

struct TargetLevels {
  std::vector<int> ideal;  // per-station dock count a rule restores
};

inline void to_json(nlohmann::json& j, const TargetLevels& t) {
  j = nlohmann::json{{"ideal", t.ideal}};
}
inline void from_json(const nlohmann::json& j, TargetLevels& t) {
  j.at("ideal").get_to(t.ideal);
}

// Everything the routing heuristic reads, decoupled from a live simulation so
// synthetic states can exercise it directly.
struct RoutingContext {
  int station = 0;                    // where the vehicle stands
  std::vector<double> distance_row;   // distance from that station
  std::vector<int> station_inventory;
  std::vector<int> station_capacity;
  int load = 0;
  int vehicle_capacity = 1;
  std::vector<char> mask;             // feasible next stations
};

// Need-match score: high when a full vehicle faces an empty station or an
// empty vehicle faces a full one. Computed from integer numerators so the
// symmetry under jointly complementing station fill and vehicle load is
// exact in floating point, not just algebraic.
inline double balance_score(int inventory, int station_capacity, int load,
                            int vehicle_capacity) {
  const double numer =
      static_cast<double>(station_capacity - inventory) * load +
      static_cast<double>(inventory) * (vehicle_capacity - load);
  return numer /
         (static_cast<double>(station_capacity) * vehicle_capacity);
}

namespace detail {

// Infinite-exponent choice: argmax of the alpha-blend of the two normalized
// un-exponentiated score families, lowest index on ties.
inline int greedy_selection(const RoutingContext& ctx, double alpha) {
  const int n = static_cast<int>(ctx.mask.size());
  double total1 = 0.0, total2 = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!ctx.mask[i]) continue;
    total1 += 1.0 / ctx.distance_row[i];
    total2 += balance_score(ctx.station_inventory[i], ctx.station_capacity[i],
                            ctx.load, ctx.vehicle_capacity);
  }
  int best = -1;
  double best_score = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!ctx.mask[i]) continue;
    const double rho1 =
        total1 > 0.0 ? (1.0 / ctx.distance_row[i]) / total1 : 0.0;
    const double g = balance_score(ctx.station_inventory[i],
                                   ctx.station_capacity[i], ctx.load,
                                   ctx.vehicle_capacity);
    const double rho2 = total2 > 0.0 ? g / total2 : 0.0;
    const double score = alpha * rho1 + (1.0 - alpha) * rho2;
    if (best < 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

}  // namespace detail

// Blended routing distribution: u(n) = alpha*rho1(n) + (1-alpha)*rho2(n),
// rho1 the normalized exponentiated inverse distances, rho2 the normalized
// exponentiated balance scores, both over unmasked stations only. Exponent 0
// is exactly uniform; an infinite exponent is a point mass on the greedy
// choice (lowest index on ties).
inline std::vector<double> routing_distribution(const RoutingContext& ctx,
                                                const HeuristicConfig& config) {
  const int n = static_cast<int>(ctx.mask.size());
  if (static_cast<int>(ctx.distance_row.size()) != n ||
      static_cast<int>(ctx.station_inventory.size()) != n ||
      static_cast<int>(ctx.station_capacity.size()) != n)
    throw ConfigError("routing context arrays disagree in length");
  if (config.alpha < 0.0 || config.alpha > 1.0)
    throw ConfigError("alpha must lie in [0,1]");
  if (!(config.m_exponent >= 0.0))
    throw ConfigError("m exponent must be >= 0");

  int unmasked = 0;
  for (int i = 0; i < n; ++i) {
    if (!ctx.mask[i]) continue;
    ++unmasked;
    if (!(ctx.distance_row[i] > 0.0))
      throw ConfigError("unmasked station " + std::to_string(i) +
                        " has non-positive distance");
  }
  if (unmasked == 0) throw ConfigError("routing mask allows no station");

  std::vector<double> u(n, 0.0);
  if (std::isinf(config.m_exponent)) {
    u[detail::greedy_selection(ctx, config.alpha)] = 1.0;
    return u;
  }
  if (config.m_exponent == 0.0) {
    for (int i = 0; i < n; ++i)
      if (ctx.mask[i]) u[i] = 1.0 / unmasked;
    return u;
  }

  std::vector<double> w1(n, 0.0), w2(n, 0.0);
  double total1 = 0.0, total2 = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!ctx.mask[i]) continue;
    w1[i] = std::pow(1.0 / ctx.distance_row[i], config.m_exponent);
    w2[i] = std::pow(
        balance_score(ctx.station_inventory[i], ctx.station_capacity[i],
                      ctx.load, ctx.vehicle_capacity),
        config.m_exponent);
    total1 += w1[i];
    total2 += w2[i];
  }
  for (int i = 0; i < n; ++i) {
    if (!ctx.mask[i]) continue;
    const double rho1 = total1 > 0.0 ? w1[i] / total1 : 1.0 / unmasked;
    const double rho2 = total2 > 0.0 ? w2[i] / total2 : 1.0 / unmasked;
    u[i] = config.alpha * rho1 + (1.0 - config.alpha) * rho2;
  }
  return u;
}

inline RoutingContext make_routing_context(const SimState& sim, int vehicle) {
  RoutingContext ctx;
  ctx.station = sim.vehicles()[vehicle].destination;
  ctx.distance_row = sim.network().distance[ctx.station];
  ctx.station_inventory = sim.station_inventory();
  ctx.station_capacity = sim.network().capacities;
  ctx.load = sim.vehicles()[vehicle].load;
  ctx.vehicle_capacity = sim.fleet().capacities[vehicle];
  ctx.mask = feasible_routing_actions(sim, vehicle);
  return ctx;
}

inline std::vector<double> routing_distribution(const SimState& sim,
                                                int vehicle,
                                                const HeuristicConfig& config) {
  return routing_distribution(make_routing_context(sim, vehicle), config);
}

inline int sample_routing(const std::vector<double>& distribution, Rng& rng) {
  double total = 0.0;
  for (double p : distribution) {
    if (p < 0.0) throw ConfigError("routing distribution has a negative entry");
    total += p;
  }
  if (total <= 0.0)
    throw ConfigError("routing distribution is all zero");
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("routing distribution does not sum to 1");
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  int last = -1;
  for (int i = 0; i < static_cast<int>(distribution.size()); ++i) {
    if (distribution[i] <= 0.0) continue;
    cumulative += distribution[i];
    last = i;
    if (u < cumulative) return i;
  }
  return last;
}

// Restore the station toward its target level, limited by what the vehicle
// can absorb or provide and by the station's own dock bounds.
inline int target_level_inventory(const SimState& sim, int vehicle,
                                  const TargetLevels& targets) {
  const VehicleStatus& veh = sim.vehicles()[vehicle];
  const int station = veh.destination;
  if (static_cast<int>(targets.ideal.size()) != sim.network().station_count)
    throw ConfigError("target levels size mismatch");
  const int d = sim.station_inventory()[station];
  const int cap = sim.fleet().capacities[vehicle];
  int l = std::clamp(d - targets.ideal[station], -veh.load, cap - veh.load);
  l = std::clamp(l, d - sim.network().capacities[station], d);
  return l;
}

// Targets a station at half capacity plus its mean net outflow over the
// episode window across the training days.
inline TargetLevels compute_empirical_targets(
    const std::vector<DemandScenario>& days, const StationNetwork& network,
    double window_start, double window_end) {
  if (days.empty()) throw ConfigError("need at least one training day");
  const int n = network.station_count;
  std::vector<double> net_outflow(n, 0.0);
  for (const auto& day : days) {
    for (const auto& trip : day.trips) {
      if (trip.departure >= window_start && trip.departure < window_end)
        net_outflow[trip.origin] += 1.0;
      if (trip.arrival >= window_start && trip.arrival < window_end)
        net_outflow[trip.destination] -= 1.0;
    }
  }
  TargetLevels targets;
  targets.ideal.resize(n);
  for (int i = 0; i < n; ++i) {
    const double tau =
        network.capacities[i] / 2.0 + net_outflow[i] / days.size();
    targets.ideal[i] =
        std::clamp(round_half_up(tau), 0, network.capacities[i]);
  }
  return targets;
}

}  // namespace bsrl
