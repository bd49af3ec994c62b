#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/dqn.hpp"
#include "bsrl/env.hpp"
#include "bsrl/policies.hpp"
#include "bsrl/scenario.hpp"
#include "bsrl/trainer.hpp"

namespace bsrl {

struct PolicySpec {
  std::string id = "dprl";
  enum class Kind { Learned, Scripted, NoRebalancing } kind = Kind::Learned;
  AgentMode mode = AgentMode::DPRL;    // layout of heads when Learned
  std::vector<NetworkParams> heads;
  HeuristicConfig heuristic;           // routing rule (Scripted, RIHR)
  TargetLevels targets;                // inventory rule (Scripted, RRHI)
};

inline PolicySpec policy_from_training(const AgentConfig& agent,
                                       TrainResult result) {
  PolicySpec policy;
  policy.id = to_string(agent.mode);
  policy.kind = PolicySpec::Kind::Learned;
  policy.mode = agent.mode;
  policy.heads = std::move(result.params);
  policy.heuristic = agent.heuristic;
  policy.targets = std::move(result.targets);
  return policy;
}

struct EvalRow {
  std::string policy;
  double epsilon = 0.0;
  int day = 0;
  int rep = 0;
  long lost_rentals = 0;
  long lost_returns = 0;
  long total = 0;
};

struct EvalReport {
  std::string policy;
  double epsilon = 0.0;
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::vector<EvalRow> rows;
  double mean_total = 0.0;
  double std_total = 0.0;  // population formula over episodes
  double mean_lost_rentals = 0.0;
  double mean_lost_returns = 0.0;
};

namespace detail {

inline void check_head_shapes(const PolicySpec& policy, int input_dim,
                              int station_count) {
  std::vector<int> expected;
  switch (policy.mode) {
    case AgentMode::DPRL: expected = {3, station_count}; break;
    case AgentMode::RIHR: expected = {3}; break;
    case AgentMode::RRHI: expected = {station_count}; break;
    case AgentMode::RSIR: expected = {3 * station_count}; break;
  }
  if (policy.heads.size() != expected.size())
    throw ConfigError("policy '" + policy.id + "' needs " +
                      std::to_string(expected.size()) + " network head(s), " +
                      "got " + std::to_string(policy.heads.size()));
  for (std::size_t h = 0; h < expected.size(); ++h) {
    if (policy.heads[h].spec.input_dim != input_dim)
      throw ConfigError("head " + std::to_string(h) + " input dim " +
                        std::to_string(policy.heads[h].spec.input_dim) +
                        " does not match the state dimension " +
                        std::to_string(input_dim));
    if (policy.heads[h].spec.output_dim != expected[h])
      throw ConfigError("head " + std::to_string(h) + " output dim " +
                        std::to_string(policy.heads[h].spec.output_dim) +
                        " does not match the action space " +
                        std::to_string(expected[h]));
  }
}

// Greedy/epsilon-greedy rollout of one test episode; no learning.
inline std::pair<long, long> rollout(const PolicySpec& policy,
                                     const StationNetwork& network,
                                     const FleetConfig& fleet,
                                     const EpisodeConfig& episode,
                                     const DemandScenario& day, double epsilon,
                                     std::uint64_t episode_seed) {
  EnvOptions options;
  options.joint_mode = policy.kind == PolicySpec::Kind::Learned &&
                       policy.mode == AgentMode::RSIR;
  Environment env(network, fleet, episode, day, episode_seed, options);
  Rng explore(substream(episode_seed, "explore"));
  Rng heuristic_rng(substream(episode_seed, "heuristic"));
  env.reset();
  while (!env.done()) {
    const DecisionPoint& dp = env.decision();
    if (policy.kind == PolicySpec::Kind::Scripted) {
      if (dp.decision_type == DecisionType::Inventory)
        env.step_scripted_inventory(
            target_level_inventory(env.sim(), dp.vehicle, policy.targets));
      else
        env.step_scripted_routing(sample_routing(
            routing_distribution(env.sim(), dp.vehicle, policy.heuristic),
            heuristic_rng));
      continue;
    }
    const int head = detail::head_for(policy.mode, dp.decision_type);
    if (head < 0) {
      if (dp.decision_type == DecisionType::Routing)
        env.step_scripted_routing(sample_routing(
            routing_distribution(env.sim(), dp.vehicle, policy.heuristic),
            heuristic_rng));
      else
        env.step_scripted_inventory(
            target_level_inventory(env.sim(), dp.vehicle, policy.targets));
      continue;
    }
    env.step(act_epsilon_greedy(forward(policy.heads[head], env.state()),
                                env.mask(), epsilon, explore));
  }
  return env.lost();
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

}  // namespace detail

// Every test day, `repetitions` episodes each; aggregates the population
// mean and standard deviation of total lost demand per episode.
inline EvalReport evaluate(const PolicySpec& policy,
                           const std::vector<DemandScenario>& test_days,
                           const StationNetwork& network,
                           const FleetConfig& fleet,
                           const EpisodeConfig& episode, double epsilon,
                           int repetitions, std::uint64_t seed) {
  if (test_days.empty()) throw ConfigError("need at least one test day");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ConfigError("epsilon must lie in [0,1]");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");

  FleetConfig used_fleet = fleet;
  if (policy.kind == PolicySpec::Kind::NoRebalancing) {
    used_fleet = FleetConfig{};
  } else if (policy.kind == PolicySpec::Kind::Learned) {
    detail::check_head_shapes(
        policy, state_dim(network.station_count, fleet.vehicle_count),
        network.station_count);
  }

  EvalReport report;
  report.policy = policy.id;
  report.epsilon = epsilon;
  report.repetitions = repetitions;
  report.seed = seed;
  std::string digest_src = policy.id + "|" + std::to_string(epsilon) + "|" +
                           std::to_string(repetitions) + "|" +
                           std::to_string(seed) + "|" +
                           std::to_string(test_days.size());
  for (const auto& head : policy.heads)
    digest_src += "|" + std::to_string(head.spec.output_dim) + ":" +
                  std::to_string(head.step);
  report.config_digest = detail::hex64(fnv1a64(digest_src));

  std::int64_t episode_counter = 0;
  for (const auto& day : test_days) {
    for (int rep = 0; rep < repetitions; ++rep) {
      const auto [rentals, returns] = detail::rollout(
          policy, network, used_fleet, episode, day, epsilon,
          substream(seed, "eval-episode", episode_counter));
      report.rows.push_back({policy.id, epsilon, day.day_index, rep, rentals,
                             returns, rentals + returns});
      ++episode_counter;
    }
  }

  double sum = 0.0, sum_rentals = 0.0, sum_returns = 0.0;
  for (const auto& row : report.rows) {
    sum += row.total;
    sum_rentals += row.lost_rentals;
    sum_returns += row.lost_returns;
  }
  const double count = static_cast<double>(report.rows.size());
  report.mean_total = sum / count;
  report.mean_lost_rentals = sum_rentals / count;
  report.mean_lost_returns = sum_returns / count;
  double sq = 0.0;
  for (const auto& row : report.rows) {
    const double d = row.total - report.mean_total;
    sq += d * d;
  }
  report.std_total = std::sqrt(sq / count);
  return report;
}

inline void write_report_csv(const EvalReport& report,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "policy,epsilon,day,rep,lost_rentals,lost_returns,total\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%d,%ld,%ld,%ld\n",
                  r.policy.c_str(), r.epsilon, r.day, r.rep, r.lost_rentals,
                  r.lost_returns, r.total);
    out << buf;
  }
}

inline void write_report_json(const EvalReport& report,
                              const std::string& path) {
  nlohmann::json j{{"policy", report.policy},
                   {"epsilon", report.epsilon},
                   {"repetitions", report.repetitions},
                   {"seed", report.seed},
                   {"config_digest", report.config_digest},
                   {"episodes", report.rows.size()},
                   {"mean_total", report.mean_total},
                   {"std_total", report.std_total},
                   {"std_formula", "population"},
                   {"mean_lost_rentals", report.mean_lost_rentals},
                   {"mean_lost_returns", report.mean_lost_returns}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace bsrl
