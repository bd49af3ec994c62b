// bsrl command-line tool: generate synthetic instances, train agents,
// evaluate policies, sweep ablation grids, and trace single episodes.
//
// One JSON config file drives every subcommand; --seed and --out override
// the corresponding config entries. Exit codes: 0 success, 2 bad
// configuration or data, 1 runtime failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <bsrl/bsrl.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bsrl::DataError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw bsrl::DataError("malformed JSON in '" + path + "': " + e.what());
  }
  if (!j.is_object())
    throw bsrl::ConfigError("config '" + path + "' must be a JSON object");
  return j;
}

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw bsrl::ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

// "m" may be a number or the string "inf" for the greedy limit.
double parse_exponent(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Inf" || s == "Infinity")
      return std::numeric_limits<double>::infinity();
    throw bsrl::ConfigError("exponent string must be \"inf\", got '" + s + "'");
  }
  throw bsrl::ConfigError("exponent must be a number or \"inf\"");
}

// Everything a run needs, resolved from the config file plus CLI overrides.
struct RunConfig {
  json raw = json::object();
  std::uint64_t seed = 0;
  std::string out = "out";

  json section(const char* name) const {
    if (!raw.contains(name)) return json::object();
    if (!raw.at(name).is_object())
      throw bsrl::ConfigError(std::string("config section '") + name +
                              "' must be an object");
    return raw.at(name);
  }
};

RunConfig resolve(const std::string& config_path,
                  const std::optional<std::uint64_t>& seed,
                  const std::optional<std::string>& out) {
  RunConfig rc;
  if (!config_path.empty()) rc.raw = load_json_file(config_path);
  require_keys(rc.raw, "config",
               {"seed", "out", "network", "fleet", "episode", "generator",
                "days", "train_days", "system", "dataset", "agent", "train",
                "evaluate", "simulate"});
  if (rc.raw.contains("seed")) rc.seed = rc.raw.at("seed").get<std::uint64_t>();
  if (rc.raw.contains("out")) rc.out = rc.raw.at("out").get<std::string>();
  if (seed) rc.seed = *seed;
  if (out) rc.out = *out;
  return rc;
}

bsrl::StationNetwork network_from_config(const RunConfig& rc) {
  const json cfg = rc.section("network");
  require_keys(cfg, "network",
               {"layout", "stations", "capacity", "extent", "vehicle_speed"});
  const double speed = cfg.value("vehicle_speed", 0.5);
  if (cfg.contains("stations")) {
    return bsrl::build_random_network(cfg.at("stations").get<int>(),
                                      cfg.value("capacity", 20),
                                      cfg.value("extent", 10.0), rc.seed,
                                      speed);
  }
  return bsrl::build_grid_network(
      bsrl::parse_layout(cfg.value("layout", "GT1")), rc.seed, speed);
}

bsrl::FleetConfig fleet_from_config(const RunConfig& rc,
                                    const bsrl::StationNetwork& network) {
  const json cfg = rc.section("fleet");
  require_keys(cfg, "fleet",
               {"vehicles", "capacity", "initial_inventory", "handling_time",
                "initial_station"});
  bsrl::FleetConfig fleet = bsrl::make_uniform_fleet(
      cfg.value("vehicles", 4), cfg.value("capacity", 40),
      cfg.value("initial_inventory", 0), cfg.value("handling_time", 0.5));
  if (cfg.contains("initial_station"))
    cfg.at("initial_station").get_to(fleet.initial_station);
  if (fleet.vehicle_count > network.station_count)
    throw bsrl::ConfigError("more vehicles than stations");
  return fleet;
}

bsrl::EpisodeConfig episode_from_config(const RunConfig& rc,
                                        const bsrl::StationNetwork& network) {
  const json cfg = rc.section("episode");
  require_keys(cfg, "episode",
               {"horizon_start", "horizon_end", "fill_levels", "initial_fill",
                "initial_inventory"});
  bsrl::EpisodeConfig ep;
  ep.horizon_start = cfg.value("horizon_start", 420.0);
  ep.horizon_end = cfg.value("horizon_end", 660.0);
  if (cfg.contains("fill_levels")) cfg.at("fill_levels").get_to(ep.fill_levels);
  if (cfg.contains("initial_inventory")) {
    cfg.at("initial_inventory").get_to(ep.initial_station_inventory);
  } else {
    const double fill = cfg.value("initial_fill", 0.5);
    if (fill < 0.0 || fill > 1.0)
      throw bsrl::ConfigError("initial_fill must lie in [0,1]");
    ep.initial_station_inventory.resize(network.station_count);
    for (int n = 0; n < network.station_count; ++n)
      ep.initial_station_inventory[n] =
          bsrl::round_half_up(network.capacities[n] * fill);
  }
  return ep;
}

bsrl::GeneratorConfig generator_from_config(const RunConfig& rc) {
  const json cfg = rc.section("generator");
  require_keys(cfg, "generator",
               {"base_rate", "peak_windows", "commute_bias", "weather_sigma",
                "rider_speed", "attractiveness", "center_stations"});
  bsrl::GeneratorConfig gen;
  gen.base_rate = cfg.value("base_rate", gen.base_rate);
  if (cfg.contains("peak_windows")) {
    gen.peak_windows.clear();
    for (const auto& w : cfg.at("peak_windows")) {
      if (!w.is_array() || w.size() != 3)
        throw bsrl::ConfigError(
            "each peak window must be [start, end, multiplier]");
      gen.peak_windows.push_back(
          {w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
    }
  }
  gen.commute_bias = cfg.value("commute_bias", gen.commute_bias);
  gen.weather_sigma = cfg.value("weather_sigma", gen.weather_sigma);
  gen.rider_speed = cfg.value("rider_speed", gen.rider_speed);
  if (cfg.contains("attractiveness"))
    cfg.at("attractiveness").get_to(gen.attractiveness);
  if (cfg.contains("center_stations"))
    cfg.at("center_stations").get_to(gen.center_stations);
  return gen;
}

bsrl::AgentConfig agent_from_config(const RunConfig& rc) {
  const json cfg = rc.section("agent");
  require_keys(cfg, "agent",
               {"mode", "hidden_layers", "output_activation", "alpha", "m",
                "targets", "heuristic_init_fraction", "replay_capacity",
                "log_wall_time", "per_vehicle_windows", "atomic_transfer"});
  bsrl::AgentConfig agent;
  agent.mode = bsrl::parse_agent_mode(cfg.value("mode", "dprl"));
  if (cfg.contains("hidden_layers"))
    cfg.at("hidden_layers").get_to(agent.hidden_layers);
  agent.output_activation =
      bsrl::parse_activation(cfg.value("output_activation", "none"));
  agent.heuristic.alpha = cfg.value("alpha", agent.heuristic.alpha);
  if (cfg.contains("m"))
    agent.heuristic.m_exponent = parse_exponent(cfg.at("m"));
  if (cfg.contains("targets")) cfg.at("targets").get_to(agent.targets.ideal);
  agent.heuristic_init_fraction =
      cfg.value("heuristic_init_fraction", agent.heuristic_init_fraction);
  if (cfg.contains("replay_capacity"))
    agent.replay_capacity = cfg.at("replay_capacity").get<std::size_t>();
  agent.log_wall_time = cfg.value("log_wall_time", false);
  agent.per_vehicle_windows = cfg.value("per_vehicle_windows", false);
  agent.atomic_transfer = cfg.value("atomic_transfer", false);

  const json tr = rc.section("train");
  require_keys(tr, "train",
               {"total_steps", "learning_rate", "gamma", "batch_size",
                "epsilon_start", "epsilon_end", "exploration_fraction",
                "target_update_interval", "train_frequency", "learning_starts",
                "optimizer"});
  bsrl::TrainConfig& t = agent.train;
  t.total_steps = tr.value("total_steps", t.total_steps);
  t.learning_rate = tr.value("learning_rate", t.learning_rate);
  t.gamma = tr.value("gamma", t.gamma);
  t.batch_size = tr.value("batch_size", t.batch_size);
  t.epsilon_start = tr.value("epsilon_start", t.epsilon_start);
  t.epsilon_end = tr.value("epsilon_end", t.epsilon_end);
  t.exploration_fraction =
      tr.value("exploration_fraction", t.exploration_fraction);
  t.target_update_interval =
      tr.value("target_update_interval", t.target_update_interval);
  t.train_frequency = tr.value("train_frequency", t.train_frequency);
  t.learning_starts = tr.value("learning_starts", t.learning_starts);
  t.optimizer = bsrl::parse_optimizer(tr.value("optimizer", "sgd"));
  t.seed = rc.seed;
  return agent;
}

struct LoadedData {
  bsrl::SystemConfig system;
  std::vector<bsrl::DemandScenario> all_days;
  std::vector<bsrl::DemandScenario> train_days;
  std::vector<bsrl::DemandScenario> test_days;
};

LoadedData load_data(const RunConfig& rc) {
  LoadedData data;
  if (!rc.raw.contains("system"))
    throw bsrl::ConfigError("config must name a 'system' file");
  if (!rc.raw.contains("dataset"))
    throw bsrl::ConfigError("config must name a 'dataset' file");
  data.system = bsrl::load_system(rc.raw.at("system").get<std::string>());
  data.all_days =
      bsrl::read_dataset(rc.raw.at("dataset").get<std::string>());
  if (rc.raw.contains("train_days")) {
    const int k = rc.raw.at("train_days").get<int>();
    std::tie(data.train_days, data.test_days) =
        bsrl::split_train_test(data.all_days, k);
  } else {
    data.train_days = data.all_days;
    data.test_days = data.all_days;
  }
  return data;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out)
    throw bsrl::DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

// ---- generate ----

int run_generate(const RunConfig& rc) {
  const auto network = network_from_config(rc);
  const auto fleet = fleet_from_config(rc, network);
  const auto episode = episode_from_config(rc, network);
  const auto violations = bsrl::validate(network, fleet, episode);
  if (!violations.empty()) {
    std::string msg = "generated system is inconsistent:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw bsrl::ConfigError(msg);
  }
  const auto generator = generator_from_config(rc);
  const int days = rc.raw.value("days", 100);

  const auto scenarios = bsrl::generate_days(network, generator, days, rc.seed);
  fs::create_directories(rc.out);
  const fs::path out(rc.out);
  bsrl::save_system({network, fleet, episode}, (out / "system.json").string());
  bsrl::write_dataset(scenarios, (out / "trips.csv").string());

  long total_trips = 0;
  for (const auto& day : scenarios)
    total_trips += static_cast<long>(day.trips.size());
  write_json_file(json{{"days", days},
                       {"seed", rc.seed},
                       {"stations", network.station_count},
                       {"vehicles", fleet.vehicle_count},
                       {"total_trips", total_trips},
                       {"expected_trips_per_day",
                        bsrl::expected_trips_per_day(generator)}},
                  out / "generate.json");
  std::cout << "wrote " << (out / "system.json").string() << " and "
            << (out / "trips.csv").string() << " (" << total_trips
            << " trips over " << days << " days)\n";
  return 0;
}

// ---- train ----

json train_into(const bsrl::AgentConfig& agent, const LoadedData& data,
                const fs::path& out) {
  fs::create_directories(out);
  bsrl::TrainResult result =
      bsrl::train(agent, data.train_days, data.system.network,
                  data.system.fleet, data.system.episode, out.string());

  json heads = json::array();
  for (std::size_t h = 0; h < result.heads.size(); ++h) {
    const std::string file = "checkpoint_" + result.heads[h] + ".json";
    bsrl::save_checkpoint(result.params[h], (out / file).string());
    heads.push_back({{"name", result.heads[h]}, {"file", file}});
  }
  json policy{{"schema_version", 1},
              {"mode", bsrl::to_string(agent.mode)},
              {"heads", heads},
              {"heuristic",
               {{"alpha", agent.heuristic.alpha},
                {"m", std::isinf(agent.heuristic.m_exponent)
                          ? json("inf")
                          : json(agent.heuristic.m_exponent)}}},
              {"targets", result.targets.ideal}};
  write_json_file(policy, out / "policy.json");

  json summary{{"mode", bsrl::to_string(agent.mode)},
               {"episodes", result.episodes},
               {"steps", result.steps},
               {"routing_fallbacks", result.routing_fallbacks},
               {"seed", agent.train.seed}};
  write_json_file(summary, out / "train_summary.json");
  return summary;
}

int run_train(const RunConfig& rc) {
  const LoadedData data = load_data(rc);
  const bsrl::AgentConfig agent = agent_from_config(rc);
  const json summary = train_into(agent, data, rc.out);
  std::cout << "trained " << summary.at("mode").get<std::string>() << ": "
            << summary.at("episodes").get<long>() << " episodes, "
            << summary.at("steps").get<long>() << " steps -> " << rc.out
            << "\n";
  return 0;
}

// ---- evaluate ----

bsrl::PolicySpec load_policy(const std::string& name, const RunConfig& rc,
                             const LoadedData& data,
                             const bsrl::AgentConfig& agent) {
  bsrl::PolicySpec policy;
  if (name == "none") {
    policy.id = "none";
    policy.kind = bsrl::PolicySpec::Kind::NoRebalancing;
    return policy;
  }
  if (name == "heuristic") {
    policy.id = "heuristic";
    policy.kind = bsrl::PolicySpec::Kind::Scripted;
    policy.heuristic = agent.heuristic;
    policy.targets = agent.targets.ideal.empty()
                         ? bsrl::compute_empirical_targets(
                               data.train_days, data.system.network,
                               data.system.episode.horizon_start,
                               data.system.episode.horizon_end)
                         : agent.targets;
    return policy;
  }
  // anything else is a path to a policy.json written by `train`
  const fs::path path(name);
  const json j = load_json_file(path.string());
  if (!j.contains("schema_version") || j.at("schema_version") != 1)
    throw bsrl::DataError("unsupported policy schema in '" + name + "'");
  policy.id = j.at("mode").get<std::string>();
  policy.kind = bsrl::PolicySpec::Kind::Learned;
  policy.mode = bsrl::parse_agent_mode(policy.id);
  for (const auto& head : j.at("heads")) {
    policy.heads.push_back(bsrl::load_checkpoint(
        (path.parent_path() / head.at("file").get<std::string>()).string()));
  }
  policy.heuristic.alpha = j.at("heuristic").at("alpha").get<double>();
  policy.heuristic.m_exponent = parse_exponent(j.at("heuristic").at("m"));
  j.at("targets").get_to(policy.targets.ideal);
  return policy;
}

int run_evaluate(const RunConfig& rc, const std::optional<double>& eps_flag,
                 const std::optional<int>& reps_flag,
                 const std::optional<std::string>& policy_flag) {
  const LoadedData data = load_data(rc);
  const bsrl::AgentConfig agent = agent_from_config(rc);
  const json cfg = rc.section("evaluate");
  require_keys(cfg, "evaluate", {"policy", "epsilon", "repetitions"});

  const std::string policy_name =
      policy_flag ? *policy_flag : cfg.value("policy", "heuristic");
  const double epsilon = eps_flag ? *eps_flag : cfg.value("epsilon", 0.0);
  int reps = reps_flag ? *reps_flag : cfg.value("repetitions", 0);
  if (reps == 0) reps = epsilon > 0.0 ? 5 : 1;

  const bsrl::PolicySpec policy = load_policy(policy_name, rc, data, agent);
  const bsrl::EvalReport report = bsrl::evaluate(
      policy, data.test_days, data.system.network, data.system.fleet,
      data.system.episode, epsilon, reps, rc.seed);

  fs::create_directories(rc.out);
  const fs::path out(rc.out);
  bsrl::write_report_csv(report, (out / "report.csv").string());
  bsrl::write_report_json(report, (out / "report.json").string());
  std::cout << report.policy << " @ epsilon=" << epsilon << ": mean lost "
            << report.mean_total << " +/- " << report.std_total << " over "
            << report.rows.size() << " episodes -> " << rc.out << "\n";
  return 0;
}

// ---- ablate ----

struct GridPoint {
  std::string label;
  bsrl::AgentConfig agent;
};

std::vector<GridPoint> build_grid(const std::string& grid,
                                  const bsrl::AgentConfig& base) {
  std::vector<GridPoint> points;
  auto derived = [&base](const std::string& label) {
    GridPoint p{label, base};
    return p;
  };
  if (grid == "m") {
    for (double m : {0.0, 1.0, 2.0}) {
      auto p = derived("m=" + std::to_string(static_cast<int>(m)));
      p.agent.heuristic.m_exponent = m;
      points.push_back(std::move(p));
    }
    auto p = derived("m=inf");
    p.agent.heuristic.m_exponent = std::numeric_limits<double>::infinity();
    points.push_back(std::move(p));
  } else if (grid == "alpha") {
    for (double a : {0.0, 0.1, 0.5, 0.8, 1.0}) {
      char label[32];
      std::snprintf(label, sizeof(label), "alpha=%g", a);
      auto p = derived(label);
      p.agent.heuristic.alpha = a;
      points.push_back(std::move(p));
    }
  } else if (grid == "activation") {
    for (const char* a : {"none", "leaky_relu", "prelu"}) {
      auto p = derived(std::string("activation=") + a);
      p.agent.output_activation = bsrl::parse_activation(a);
      points.push_back(std::move(p));
    }
  } else if (grid == "depth") {
    for (int depth : {1, 2, 3}) {
      auto p = derived("depth=" + std::to_string(depth));
      std::vector<int>& layers = p.agent.hidden_layers;
      while (static_cast<int>(layers.size()) > depth) layers.pop_back();
      while (static_cast<int>(layers.size()) < depth)
        layers.push_back(std::max(8, layers.back() / 2));
      points.push_back(std::move(p));
    }
  } else {
    throw bsrl::ConfigError("unknown grid '" + grid +
                            "' (m|alpha|activation|depth)");
  }
  return points;
}

int run_ablate(const RunConfig& rc, const std::string& grid,
               const std::optional<double>& eps_flag,
               const std::optional<int>& reps_flag) {
  const LoadedData data = load_data(rc);
  const bsrl::AgentConfig base = agent_from_config(rc);
  const json cfg = rc.section("evaluate");
  const double epsilon = eps_flag ? *eps_flag : cfg.value("epsilon", 0.0);
  int reps = reps_flag ? *reps_flag : cfg.value("repetitions", 0);
  if (reps == 0) reps = epsilon > 0.0 ? 5 : 1;

  fs::create_directories(rc.out);
  const fs::path out(rc.out);
  std::ofstream summary(out / ("ablate_" + grid + ".csv"));
  if (!summary)
    throw bsrl::DataError("cannot open ablation summary in '" + rc.out + "'");
  summary << "grid,value,policy,epsilon,episodes,mean_total,std_total,"
             "mean_lost_rentals,mean_lost_returns\n";

  for (const GridPoint& point : build_grid(grid, base)) {
    fs::path run_dir = out / point.label;
    train_into(point.agent, data, run_dir);
    const bsrl::PolicySpec policy = load_policy(
        (run_dir / "policy.json").string(), rc, data, point.agent);
    const bsrl::EvalReport report = bsrl::evaluate(
        policy, data.test_days, data.system.network, data.system.fleet,
        data.system.episode, epsilon, reps, rc.seed);
    bsrl::write_report_csv(report, (run_dir / "report.csv").string());
    bsrl::write_report_json(report, (run_dir / "report.json").string());
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n",
                  grid.c_str(), point.label.c_str(), report.policy.c_str(),
                  epsilon, report.rows.size(), report.mean_total,
                  report.std_total, report.mean_lost_rentals,
                  report.mean_lost_returns);
    summary << buf;
    summary.flush();
    std::cout << point.label << ": mean lost " << report.mean_total << " +/- "
              << report.std_total << "\n";
  }
  std::cout << "ablation summary -> "
            << (out / ("ablate_" + grid + ".csv")).string() << "\n";
  return 0;
}

// ---- simulate ----

int run_simulate(const RunConfig& rc) {
  const LoadedData data = load_data(rc);
  const bsrl::AgentConfig agent = agent_from_config(rc);
  const json cfg = rc.section("simulate");
  require_keys(cfg, "simulate", {"day", "policy"});
  const int day_index = cfg.value("day", 0);
  if (day_index < 0 || day_index >= static_cast<int>(data.all_days.size()))
    throw bsrl::ConfigError("simulate.day out of range");
  const std::string policy_name = cfg.value("policy", "heuristic");
  const bsrl::PolicySpec policy = load_policy(policy_name, rc, data, agent);
  if (policy.kind == bsrl::PolicySpec::Kind::Learned)
    throw bsrl::ConfigError(
        "simulate traces scripted policies; use evaluate for checkpoints");

  fs::create_directories(rc.out);
  const fs::path out(rc.out);
  std::ofstream trace(out / "trace.jsonl");
  if (!trace)
    throw bsrl::DataError("cannot open trace in '" + rc.out + "'");

  bsrl::EnvOptions options;
  options.sim.trace = &trace;
  bsrl::FleetConfig fleet = data.system.fleet;
  if (policy.kind == bsrl::PolicySpec::Kind::NoRebalancing)
    fleet = bsrl::FleetConfig{};
  bsrl::Environment env(data.system.network, fleet, data.system.episode,
                        data.all_days[day_index], rc.seed, options);
  bsrl::Rng heuristic_rng(bsrl::substream(rc.seed, "heuristic"));
  long decisions = 0;
  env.reset();
  while (!env.done()) {
    const bsrl::DecisionPoint& dp = env.decision();
    ++decisions;
    if (dp.decision_type == bsrl::DecisionType::Inventory) {
      env.step_scripted_inventory(bsrl::target_level_inventory(
          env.sim(), dp.vehicle, policy.targets));
    } else {
      env.step_scripted_routing(bsrl::sample_routing(
          bsrl::routing_distribution(env.sim(), dp.vehicle, policy.heuristic),
          heuristic_rng));
    }
  }
  const auto [rentals, returns] = env.lost();
  write_json_file(json{{"day", data.all_days[day_index].day_index},
                       {"policy", policy.id},
                       {"decisions", decisions},
                       {"lost_rentals", rentals},
                       {"lost_returns", returns},
                       {"total", rentals + returns}},
                  out / "simulate.json");
  std::cout << "day " << data.all_days[day_index].day_index << " under "
            << policy.id << ": lost " << rentals << "+" << returns
            << " -> " << (out / "trace.jsonl").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bike-share rebalancing: simulate, train, evaluate"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> epsilon;
  std::optional<int> reps;
  std::optional<std::string> policy;
  std::string grid = "m";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "root random seed (overrides config)");
    cmd->add_option("--out", out, "output directory (overrides config)");
  };

  CLI::App* generate =
      app.add_subcommand("generate", "build a station network and demand dataset");
  add_common(generate);
  CLI::App* train = app.add_subcommand("train", "train an agent");
  add_common(train);
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate a policy on the test days");
  add_common(evaluate);
  evaluate->add_option("--epsilon", epsilon, "exploration rate during rollout");
  evaluate->add_option("--reps", reps, "episodes per test day");
  evaluate->add_option("--policy", policy,
                       "none | heuristic | path to policy.json");
  CLI::App* ablate =
      app.add_subcommand("ablate", "train + evaluate across a parameter grid");
  add_common(ablate);
  ablate->add_option("--grid", grid, "m | alpha | activation | depth");
  ablate->add_option("--epsilon", epsilon, "exploration rate during rollout");
  ablate->add_option("--reps", reps, "episodes per test day");
  CLI::App* simulate =
      app.add_subcommand("simulate", "trace one scripted episode as JSON lines");
  add_common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and usage hint
    return 2;
  }

  try {
    const RunConfig rc = resolve(config_path, seed, out);
    if (generate->parsed()) return run_generate(rc);
    if (train->parsed()) return run_train(rc);
    if (evaluate->parsed()) return run_evaluate(rc, epsilon, reps, policy);
    if (ablate->parsed()) return run_ablate(rc, grid, epsilon, reps);
    if (simulate->parsed()) return run_simulate(rc);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const bsrl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bsrl::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
