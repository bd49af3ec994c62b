#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"
#include "bsrl/dqn.hpp"
#include "bsrl/env.hpp"
#include "bsrl/policies.hpp"
#include "bsrl/scenario.hpp"
#include "bsrl/sim.hpp"

namespace bsrl {

// DPRL learns both decisions with separate heads; RIHR learns inventory and
// routes by the fixed heuristic; RRHI learns routing and restores target
// levels; RSIR learns one joint (fill level, next station) action at arrival.
enum class AgentMode { DPRL, RIHR, RRHI, RSIR };

inline std::string to_string(AgentMode mode) {
  switch (mode) {
    case AgentMode::DPRL: return "dprl";
    case AgentMode::RIHR: return "rihr";
    case AgentMode::RRHI: return "rrhi";
    case AgentMode::RSIR: return "rsir";
  }
  return "?";
}

inline AgentMode parse_agent_mode(const std::string& s) {
  if (s == "dprl") return AgentMode::DPRL;
  if (s == "rihr") return AgentMode::RIHR;
  if (s == "rrhi") return AgentMode::RRHI;
  if (s == "rsir") return AgentMode::RSIR;
  throw ConfigError("unknown agent mode '" + s + "' (dprl|rihr|rrhi|rsir)");
}

struct AgentConfig {
  AgentMode mode = AgentMode::DPRL;
  HeuristicConfig heuristic;       // init routing for DPRL, fixed side of RIHR
  TargetLevels targets;            // fixed side of RRHI; computed when empty
  TrainConfig train;
  std::vector<int> hidden_layers{1024, 512};
  Activation output_activation = Activation::Identity;
  double heuristic_init_fraction = 0.1;  // of total steps, DPRL routing only
  std::size_t replay_capacity = 10000;
  // wall_ms stays 0 unless enabled so identical runs produce identical logs
  bool log_wall_time = false;
  bool per_vehicle_windows = false;
  bool atomic_transfer = false;
};

struct LogRow {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double episode_return = 0.0;
  double td_loss = 0.0;
  double mean_q = 0.0;
  double epsilon = 0.0;
  double wall_ms = 0.0;
};

struct TrainingLog {
  std::vector<std::string> streams;
  std::vector<std::vector<LogRow>> rows;  // one vector per stream
};

inline void write_log_csv(const TrainingLog& log, std::size_t stream,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "step,episode,return,td_loss,mean_q,epsilon,wall_ms\n";
  char buf[256];
  for (const LogRow& r : log.rows[stream]) {
    std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.step),
                  static_cast<long long>(r.episode), r.episode_return,
                  r.td_loss, r.mean_q, r.epsilon, r.wall_ms);
    out << buf;
  }
}

struct TrainResult {
  std::vector<std::string> heads;  // parallel to params
  std::vector<NetworkParams> params;
  TrainingLog log;
  TargetLevels targets;  // the levels actually used (RRHI may compute them)
  long routing_fallbacks = 0;  // RSIR conflicts resolved at departure
  std::int64_t episodes = 0;
  std::int64_t steps = 0;
};

namespace detail {

struct Head {
  NetworkParams params;
  NetworkParams target;
  Optimizer optimizer;
  ReplayBuffer buffer;
  Rng replay_rng;
  std::int64_t gradient_steps = 0;
  double loss_sum = 0.0;
  double q_sum = 0.0;
  std::int64_t update_count = 0;
};

inline int head_for(AgentMode mode, DecisionType type) {
  switch (mode) {
    case AgentMode::DPRL:
      return type == DecisionType::Inventory ? 0 : 1;
    case AgentMode::RIHR:
      return type == DecisionType::Inventory ? 0 : -1;
    case AgentMode::RRHI:
      return type == DecisionType::Routing ? 0 : -1;
    case AgentMode::RSIR:
      return 0;  // joint decisions arrive as inventory-type points
  }
  return -1;
}

}  // namespace detail

// Runs episodes over uniformly sampled training days until the step budget
// is spent (checked between episodes), learning per the DQN configuration.
inline TrainResult train(const AgentConfig& agent,
                         const std::vector<DemandScenario>& days,
                         const StationNetwork& network,
                         const FleetConfig& fleet,
                         const EpisodeConfig& episode,
                         const std::string& log_dir = "") {
  if (days.empty()) throw ConfigError("need at least one training day");
  validate(agent.train);
  if (agent.heuristic_init_fraction < 0.0 ||
      agent.heuristic_init_fraction > 1.0)
    throw ConfigError("heuristic_init_fraction must lie in [0,1]");
  if (fleet.vehicle_count < 1)
    throw ConfigError("training needs at least one vehicle");

  const std::uint64_t seed = agent.train.seed;
  const int n = network.station_count;
  const int input_dim = state_dim(n, fleet.vehicle_count);

  TrainResult result;
  std::vector<detail::Head> heads;
  auto add_head = [&](const std::string& name, int output_dim) {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.hidden_layers = agent.hidden_layers;
    spec.output_dim = output_dim;
    spec.output_activation = agent.output_activation;
    detail::Head head{init_params(spec, substream(seed, name + "-weights")),
                      {},
                      Optimizer{agent.train.optimizer},
                      ReplayBuffer(agent.replay_capacity),
                      Rng(substream(seed, name + "-replay"))};
    head.target = head.params;
    heads.push_back(std::move(head));
    result.heads.push_back(name);
  };
  switch (agent.mode) {
    case AgentMode::DPRL:
      add_head("inventory", 3);
      add_head("routing", n);
      break;
    case AgentMode::RIHR:
      add_head("inventory", 3);
      break;
    case AgentMode::RRHI:
      add_head("routing", n);
      break;
    case AgentMode::RSIR:
      add_head("joint", 3 * n);
      break;
  }

  TargetLevels targets = agent.targets;
  if (agent.mode == AgentMode::RRHI && targets.ideal.empty())
    targets = compute_empirical_targets(days, network, episode.horizon_start,
                                        episode.horizon_end);
  result.targets = targets;

  result.log.streams = result.heads;
  result.log.rows.resize(heads.size());
  std::vector<std::optional<std::ofstream>> log_files(heads.size());
  if (!log_dir.empty()) {
    std::filesystem::create_directories(log_dir);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      auto& file = log_files[h].emplace(
          std::filesystem::path(log_dir) /
          ("train_" + result.heads[h] + ".csv"));
      if (!file)
        throw DataError("cannot open training log in '" + log_dir + "'");
      file << "step,episode,return,td_loss,mean_q,epsilon,wall_ms\n";
    }
  }

  EnvOptions env_options;
  env_options.joint_mode = agent.mode == AgentMode::RSIR;
  env_options.per_vehicle_windows = agent.per_vehicle_windows;
  env_options.sim.incremental_transfer = !agent.atomic_transfer;

  Rng day_rng(substream(seed, "episode-days"));
  Rng explore_rng(substream(seed, "explore"));
  Rng heuristic_rng(substream(seed, "heuristic-init"));
  const std::int64_t heuristic_until = static_cast<std::int64_t>(
      agent.heuristic_init_fraction *
      static_cast<double>(agent.train.total_steps));

  const auto t0 = std::chrono::steady_clock::now();
  std::int64_t step = 0;
  std::int64_t episode_index = 0;

  auto learn = [&](detail::Head& head) {
    if (step < agent.train.learning_starts) return;
    if (step % agent.train.train_frequency != 0) return;
    if (head.buffer.size() == 0) return;
    const auto batch =
        head.buffer.sample(agent.train.batch_size, head.replay_rng);
    const auto targets_vec =
        td_targets(head.target, batch, agent.train.gamma);
    TrainBatch train_batch;
    train_batch.states.reserve(batch.size());
    train_batch.actions.reserve(batch.size());
    for (const TransitionSample* s : batch) {
      train_batch.states.push_back(s->state);
      train_batch.actions.push_back(s->action);
    }
    train_batch.targets = targets_vec;
    const UpdateStats stats = backward_step(
        head.params, train_batch, agent.train.learning_rate, &head.optimizer);
    head.loss_sum += stats.loss;
    head.q_sum += stats.mean_q;
    ++head.update_count;
    ++head.gradient_steps;
    if (head.gradient_steps % agent.train.target_update_interval == 0)
      head.target = head.params;
  };

  while (step < agent.train.total_steps) {
    const std::size_t day_index = day_rng.uniform_index(days.size());
    Environment env(network, fleet, episode, days[day_index],
                    substream(seed, "episode", episode_index), env_options);
    std::vector<double> stream_return(heads.size(), 0.0);

    auto absorb = [&](const std::vector<TransitionSample>& transitions) {
      for (const TransitionSample& t : transitions) {
        const int h = detail::head_for(agent.mode, t.type);
        if (h < 0) continue;
        stream_return[h] += t.reward;
        heads[h].buffer.push(t);
      }
    };

    absorb(env.reset().transitions);
    while (!env.done()) {
      const DecisionPoint& dp = env.decision();
      const int h = detail::head_for(agent.mode, dp.decision_type);
      Environment::StepResult step_result;
      if (h < 0) {
        // the fixed, non-learned side of RIHR / RRHI
        if (dp.decision_type == DecisionType::Routing) {
          const auto dist =
              routing_distribution(env.sim(), dp.vehicle, agent.heuristic);
          step_result = env.step_scripted_routing(
              sample_routing(dist, heuristic_rng));
        } else {
          step_result = env.step_scripted_inventory(
              target_level_inventory(env.sim(), dp.vehicle, targets));
        }
      } else {
        int action;
        const bool heuristic_phase = agent.mode == AgentMode::DPRL &&
                                     dp.decision_type == DecisionType::Routing &&
                                     step < heuristic_until;
        if (heuristic_phase) {
          action = sample_routing(
              routing_distribution(env.sim(), dp.vehicle, agent.heuristic),
              heuristic_rng);
        } else {
          const double eps = epsilon_schedule(step, agent.train);
          action = act_epsilon_greedy(forward(heads[h].params, env.state()),
                                      env.mask(), eps, explore_rng);
        }
        step_result = env.step(action);
      }
      ++step;
      absorb(step_result.transitions);
      for (auto& head : heads) learn(head);
    }

    for (std::size_t h = 0; h < heads.size(); ++h) {
      LogRow row;
      row.step = step;
      row.episode = episode_index;
      row.episode_return = stream_return[h];
      row.td_loss = heads[h].update_count
                        ? heads[h].loss_sum / heads[h].update_count
                        : 0.0;
      row.mean_q = heads[h].update_count
                       ? heads[h].q_sum / heads[h].update_count
                       : 0.0;
      row.epsilon = epsilon_schedule(std::min(step, agent.train.total_steps),
                                     agent.train);
      if (agent.log_wall_time) {
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }
      heads[h].loss_sum = heads[h].q_sum = 0.0;
      heads[h].update_count = 0;
      result.log.rows[h].push_back(row);
      if (log_files[h]) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(row.step),
                      static_cast<long long>(row.episode), row.episode_return,
                      row.td_loss, row.mean_q, row.epsilon, row.wall_ms);
        *log_files[h] << buf;
        log_files[h]->flush();
      }
    }
    result.routing_fallbacks += env.fallback_count();
    ++episode_index;
  }

  for (auto& head : heads) {
    head.params.step = step;
    result.params.push_back(std::move(head.params));
  }
  result.episodes = episode_index;
  result.steps = step;
  return result;
}

}  // namespace bsrl
