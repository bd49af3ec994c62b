#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <string>
#include <vector>

#include <bsrl/trainer.hpp>

#include "support/builders.hpp"
#include "support/tempdir.hpp"

namespace {

// Small but non-trivial world: four stations, one truck, three synthetic
// demand days. Every training test runs on this rig to stay fast.
struct TrainRig {
  bsrl::StationNetwork net;
  bsrl::FleetConfig fleet;
  bsrl::EpisodeConfig episode;
  std::vector<bsrl::DemandScenario> days;

  TrainRig() {
    bsrl::Rng rng(2024);
    net = testsupport::random_network(rng, 4, 3.0, 4, 8);
    fleet.vehicle_count = 1;
    fleet.capacities = {4};
    fleet.initial_inventory = {2};
    fleet.initial_station = {0};
    fleet.handling_time = 0.5;
    episode.horizon_start = 420.0;
    episode.horizon_end = 480.0;
    episode.fill_levels = {0.2, 0.5, 0.8};
    episode.initial_station_inventory.resize(4);
    for (int i = 0; i < 4; ++i)
      episode.initial_station_inventory[i] = net.capacities[i] / 2;
    for (int d = 0; d < 3; ++d) {
      bsrl::DemandScenario day;
      day.day_index = d;
      day.trips = testsupport::random_trips(rng, 25, 4, 420.0, 480.0);
      days.push_back(std::move(day));
    }
  }
};

bsrl::AgentConfig quick_agent(bsrl::AgentMode mode, std::int64_t total_steps,
                              std::int64_t learning_starts) {
  bsrl::AgentConfig agent;
  agent.mode = mode;
  agent.hidden_layers = {8};
  agent.replay_capacity = 512;
  agent.train.total_steps = total_steps;
  agent.train.learning_starts = learning_starts;
  agent.train.batch_size = 16;
  agent.train.train_frequency = 2;
  agent.train.target_update_interval = 20;
  agent.train.learning_rate = 1e-3;
  agent.train.seed = 17;
  return agent;
}

bool same_rows(const std::vector<bsrl::LogRow>& a,
               const std::vector<bsrl::LogRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step || a[i].episode != b[i].episode ||
        a[i].episode_return != b[i].episode_return ||
        a[i].td_loss != b[i].td_loss || a[i].mean_q != b[i].mean_q ||
        a[i].epsilon != b[i].epsilon || a[i].wall_ms != b[i].wall_ms)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("dual training keeps one head per decision type") {
  TrainRig rig;
  const auto result = bsrl::train(quick_agent(bsrl::AgentMode::DPRL, 120, 40),
                                  rig.days, rig.net, rig.fleet, rig.episode);

  CHECK(result.heads == std::vector<std::string>{"inventory", "routing"});
  REQUIRE(result.params.size() == 2);
  CHECK(result.params[0].spec.output_dim == 3);
  CHECK(result.params[1].spec.output_dim == rig.net.station_count);
  CHECK(result.steps >= 120);
  CHECK(result.episodes >= 1);
  CHECK(result.params[0].step == result.steps);
  CHECK(result.params[1].step == result.steps);

  // both reward streams tile the same horizon, so their episode returns
  // agree exactly, episode by episode
  REQUIRE(result.log.rows.size() == 2);
  REQUIRE(result.log.rows[0].size() ==
          static_cast<std::size_t>(result.episodes));
  for (std::size_t e = 0; e < result.log.rows[0].size(); ++e) {
    CHECK(result.log.rows[0][e].episode_return ==
          result.log.rows[1][e].episode_return);
    CHECK(result.log.rows[0][e].wall_ms == 0.0);
  }

  // with learning well underway, TD losses actually accumulate
  bool any_loss = false;
  for (const auto& row : result.log.rows[0])
    if (row.td_loss > 0.0) any_loss = true;
  CHECK(any_loss);
}

TEST_CASE("single-head modes learn only their own decision") {
  TrainRig rig;
  SECTION("learned inventory with heuristic routing") {
    const auto result =
        bsrl::train(quick_agent(bsrl::AgentMode::RIHR, 80, 30), rig.days,
                    rig.net, rig.fleet, rig.episode);
    CHECK(result.heads == std::vector<std::string>{"inventory"});
    REQUIRE(result.params.size() == 1);
    CHECK(result.params[0].spec.output_dim == 3);
    CHECK(result.steps >= 80);
  }
  SECTION("learned routing computes target levels when none are given") {
    const auto result =
        bsrl::train(quick_agent(bsrl::AgentMode::RRHI, 80, 30), rig.days,
                    rig.net, rig.fleet, rig.episode);
    CHECK(result.heads == std::vector<std::string>{"routing"});
    REQUIRE(result.params.size() == 1);
    CHECK(result.params[0].spec.output_dim == rig.net.station_count);
    REQUIRE(result.targets.ideal.size() ==
            static_cast<std::size_t>(rig.net.station_count));
    for (int i = 0; i < rig.net.station_count; ++i) {
      CHECK(result.targets.ideal[i] >= 0);
      CHECK(result.targets.ideal[i] <= rig.net.capacities[i]);
    }
  }
  SECTION("explicitly provided target levels are used verbatim") {
    auto agent = quick_agent(bsrl::AgentMode::RRHI, 60, 30);
    agent.targets.ideal = {1, 2, 3, 4};
    const auto result =
        bsrl::train(agent, rig.days, rig.net, rig.fleet, rig.episode);
    CHECK(result.targets.ideal == std::vector<int>{1, 2, 3, 4});
  }
  SECTION("joint mode trains one combined head") {
    const auto result =
        bsrl::train(quick_agent(bsrl::AgentMode::RSIR, 60, 30), rig.days,
                    rig.net, rig.fleet, rig.episode);
    CHECK(result.heads == std::vector<std::string>{"joint"});
    REQUIRE(result.params.size() == 1);
    CHECK(result.params[0].spec.output_dim == 3 * rig.net.station_count);
  }
}

TEST_CASE("before learning starts the loss columns stay at zero") {
  TrainRig rig;
  // the whole budget fits under learning_starts: no gradient step ever runs
  const auto result = bsrl::train(quick_agent(bsrl::AgentMode::DPRL, 50, 1000),
                                  rig.days, rig.net, rig.fleet, rig.episode);
  for (const auto& stream : result.log.rows)
    for (const auto& row : stream) {
      CHECK(row.td_loss == 0.0);
      CHECK(row.mean_q == 0.0);
    }
}

TEST_CASE("training runs are reproducible to the byte") {
  TrainRig rig;
  testsupport::TempDir dir_a("train-a"), dir_b("train-b");
  const auto agent = quick_agent(bsrl::AgentMode::DPRL, 100, 30);
  const auto run_a = bsrl::train(agent, rig.days, rig.net, rig.fleet,
                                 rig.episode, dir_a.path());
  const auto run_b = bsrl::train(agent, rig.days, rig.net, rig.fleet,
                                 rig.episode, dir_b.path());

  REQUIRE(run_a.log.rows.size() == run_b.log.rows.size());
  for (std::size_t h = 0; h < run_a.log.rows.size(); ++h)
    CHECK(same_rows(run_a.log.rows[h], run_b.log.rows[h]));
  for (std::size_t h = 0; h < run_a.params.size(); ++h) {
    CHECK(run_a.params[h].weights == run_b.params[h].weights);
    CHECK(run_a.params[h].biases == run_b.params[h].biases);
  }
  for (const std::string head : {"inventory", "routing"}) {
    const std::string name = "train_" + head + ".csv";
    const std::string a = testsupport::slurp(dir_a.file(name));
    CHECK(a == testsupport::slurp(dir_b.file(name)));
    CHECK(a.rfind("step,episode,return,td_loss,mean_q,epsilon,wall_ms\n", 0) ==
          0);
    // one log row per episode, plus the header line
    CHECK(std::count(a.begin(), a.end(), '\n') ==
          static_cast<long>(run_a.episodes) + 1);
  }
}

TEST_CASE("the log writer prints full-precision scalar columns") {
  bsrl::TrainingLog log;
  log.streams = {"inventory"};
  log.rows.resize(1);
  bsrl::LogRow row;
  row.step = 42;
  row.episode = 3;
  row.episode_return = -2.0;
  row.epsilon = 0.5;
  log.rows[0].push_back(row);

  testsupport::TempDir dir("log");
  const std::string path = dir.file("train_inventory.csv");
  bsrl::write_log_csv(log, 0, path);
  CHECK(testsupport::slurp(path) ==
        "step,episode,return,td_loss,mean_q,epsilon,wall_ms\n"
        "42,3,-2,0,0,0.5,0\n");
}

TEST_CASE("training rejects configurations it cannot honor") {
  TrainRig rig;
  auto agent = quick_agent(bsrl::AgentMode::DPRL, 50, 10);

  CHECK_THROWS_AS(
      bsrl::train(agent, {}, rig.net, rig.fleet, rig.episode),
      bsrl::ConfigError);

  agent.heuristic_init_fraction = 1.5;
  CHECK_THROWS_AS(
      bsrl::train(agent, rig.days, rig.net, rig.fleet, rig.episode),
      bsrl::ConfigError);
  agent.heuristic_init_fraction = 0.1;

  auto empty_fleet = rig.fleet;
  empty_fleet.vehicle_count = 0;
  empty_fleet.capacities.clear();
  empty_fleet.initial_inventory.clear();
  empty_fleet.initial_station.clear();
  CHECK_THROWS_AS(
      bsrl::train(agent, rig.days, rig.net, empty_fleet, rig.episode),
      bsrl::ConfigError);

  agent.train.gamma = 1.5;
  CHECK_THROWS_AS(
      bsrl::train(agent, rig.days, rig.net, rig.fleet, rig.episode),
      bsrl::ConfigError);
}
