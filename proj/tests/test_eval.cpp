#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <json.hpp>

#include <bsrl/eval.hpp>

#include "support/builders.hpp"
#include "support/tempdir.hpp"

namespace {

// Two-station world where all demand leaves from station 1, which starts
// empty; a loaded truck at station 0 can save the day if the policy sends it.
struct EvalRig {
  bsrl::StationNetwork net;
  bsrl::FleetConfig fleet;
  bsrl::EpisodeConfig episode;
  bsrl::DemandScenario rush_day;   // four rentals from the empty station
  bsrl::DemandScenario quiet_day;  // no demand at all

  EvalRig() {
    net.station_count = 2;
    net.capacities = {10, 10};
    net.coordinates = {{0.0, 0.0}, {2.0, 0.0}};
    net.distance = {{0.0, 2.0}, {2.0, 0.0}};
    net.transit_time = {{0.0, 4.0}, {4.0, 0.0}};
    fleet.vehicle_count = 1;
    fleet.capacities = {5};
    fleet.initial_inventory = {5};
    fleet.initial_station = {0};
    fleet.handling_time = 0.5;
    episode.horizon_start = 420.0;
    episode.horizon_end = 480.0;
    episode.fill_levels = {0.2, 0.5, 0.8};
    episode.initial_station_inventory = {0, 0};
    rush_day.day_index = 0;
    for (int i = 0; i < 4; ++i)
      rush_day.trips.push_back({1, 440.0 + i, 0, 450.0 + i});
    quiet_day.day_index = 1;
  }
};

bsrl::PolicySpec none_policy() {
  bsrl::PolicySpec policy;
  policy.id = "none";
  policy.kind = bsrl::PolicySpec::Kind::NoRebalancing;
  return policy;
}

bsrl::PolicySpec refill_policy() {
  bsrl::PolicySpec policy;
  policy.id = "heuristic";
  policy.kind = bsrl::PolicySpec::Kind::Scripted;
  policy.targets.ideal = {0, 5};  // push everything to the demand side
  policy.heuristic = {0.5, 1.0};
  return policy;
}

bsrl::PolicySpec random_dprl_policy(int input_dim, int stations,
                                    std::uint64_t seed) {
  bsrl::PolicySpec policy;
  policy.id = "dprl";
  policy.kind = bsrl::PolicySpec::Kind::Learned;
  policy.mode = bsrl::AgentMode::DPRL;
  bsrl::NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.hidden_layers = {4};
  spec.output_dim = 3;
  policy.heads.push_back(bsrl::init_params(spec, seed));
  spec.output_dim = stations;
  policy.heads.push_back(bsrl::init_params(spec, seed + 1));
  return policy;
}

bool same_rows(const std::vector<bsrl::EvalRow>& a,
               const std::vector<bsrl::EvalRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].policy != b[i].policy || a[i].epsilon != b[i].epsilon ||
        a[i].day != b[i].day || a[i].rep != b[i].rep ||
        a[i].lost_rentals != b[i].lost_rentals ||
        a[i].lost_returns != b[i].lost_returns || a[i].total != b[i].total)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a restocking policy saves demand that no-rebalancing loses") {
  EvalRig rig;
  const auto idle = bsrl::evaluate(none_policy(), {rig.rush_day}, rig.net,
                                   rig.fleet, rig.episode, 0.0, 1, 7);
  const auto refill = bsrl::evaluate(refill_policy(), {rig.rush_day}, rig.net,
                                     rig.fleet, rig.episode, 0.0, 1, 7);
  // every rental leaves the empty station: all four are lost without help
  CHECK(idle.mean_total == 4.0);
  CHECK(idle.mean_lost_rentals == 4.0);
  CHECK(idle.mean_lost_returns == 0.0);
  // the truck drops its five bikes there by minute 427, well before demand
  CHECK(refill.mean_total == 0.0);
  CHECK(refill.mean_total < idle.mean_total);
}

TEST_CASE("evaluation is deterministic including its config digest") {
  EvalRig rig;
  const auto a = bsrl::evaluate(refill_policy(), {rig.rush_day, rig.quiet_day},
                                rig.net, rig.fleet, rig.episode, 0.0, 2, 11);
  const auto b = bsrl::evaluate(refill_policy(), {rig.rush_day, rig.quiet_day},
                                rig.net, rig.fleet, rig.episode, 0.0, 2, 11);
  CHECK(same_rows(a.rows, b.rows));
  CHECK(a.config_digest == b.config_digest);
  CHECK(a.config_digest.size() == 16);

  // exploration draws come from per-episode substreams, so epsilon > 0 stays
  // reproducible too
  const int dim = bsrl::state_dim(2, 1);
  const auto c = bsrl::evaluate(random_dprl_policy(dim, 2, 3), {rig.rush_day},
                                rig.net, rig.fleet, rig.episode, 0.3, 3, 11);
  const auto d = bsrl::evaluate(random_dprl_policy(dim, 2, 3), {rig.rush_day},
                                rig.net, rig.fleet, rig.episode, 0.3, 3, 11);
  CHECK(same_rows(c.rows, d.rows));

  // the digest reacts to the things that change the experiment
  const auto other_seed =
      bsrl::evaluate(refill_policy(), {rig.rush_day, rig.quiet_day}, rig.net,
                     rig.fleet, rig.episode, 0.0, 2, 12);
  CHECK(a.config_digest != other_seed.config_digest);
  auto renamed = refill_policy();
  renamed.id = "heuristic-b";
  const auto other_id =
      bsrl::evaluate(renamed, {rig.rush_day, rig.quiet_day}, rig.net, rig.fleet,
                     rig.episode, 0.0, 2, 11);
  CHECK(a.config_digest != other_id.config_digest);
}

TEST_CASE("quiet days cost nothing under any policy kind") {
  EvalRig rig;
  const int dim = bsrl::state_dim(2, 1);
  for (const auto& policy :
       {none_policy(), refill_policy(), random_dprl_policy(dim, 2, 21)}) {
    const auto report = bsrl::evaluate(policy, {rig.quiet_day}, rig.net,
                                       rig.fleet, rig.episode, 0.0, 1, 5);
    INFO("policy " << policy.id);
    CHECK(report.mean_total == 0.0);
    CHECK(report.std_total == 0.0);
  }
}

TEST_CASE("the spread uses the population formula") {
  EvalRig rig;
  // totals are {4, 0}: mean 2, population std 2 (the sample formula gives
  // sqrt(8) and would fail this check)
  const auto report =
      bsrl::evaluate(none_policy(), {rig.rush_day, rig.quiet_day}, rig.net,
                     rig.fleet, rig.episode, 0.0, 1, 9);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.mean_total == 2.0);
  CHECK(report.std_total == 2.0);
}

TEST_CASE("repetitions repeat every day with fresh episode streams") {
  EvalRig rig;
  const auto report =
      bsrl::evaluate(refill_policy(), {rig.rush_day, rig.quiet_day}, rig.net,
                     rig.fleet, rig.episode, 0.0, 3, 13);
  REQUIRE(report.rows.size() == 6);
  CHECK(report.repetitions == 3);
  for (int day = 0; day < 2; ++day)
    for (int rep = 0; rep < 3; ++rep) {
      const auto& row = report.rows[day * 3 + rep];
      CHECK(row.day == day);
      CHECK(row.rep == rep);
      CHECK(row.policy == "heuristic");
      CHECK(row.epsilon == 0.0);
    }
}

TEST_CASE("learned policies must match the environment's shapes") {
  EvalRig rig;
  const int dim = bsrl::state_dim(2, 1);

  auto wrong_input = random_dprl_policy(dim + 3, 2, 1);
  CHECK_THROWS_WITH(
      bsrl::evaluate(wrong_input, {rig.rush_day}, rig.net, rig.fleet,
                     rig.episode, 0.0, 1, 1),
      Catch::Matchers::ContainsSubstring("state dimension"));

  auto wrong_output = random_dprl_policy(dim, 5, 1);  // routing head too wide
  CHECK_THROWS_WITH(
      bsrl::evaluate(wrong_output, {rig.rush_day}, rig.net, rig.fleet,
                     rig.episode, 0.0, 1, 1),
      Catch::Matchers::ContainsSubstring("action space"));

  auto missing_head = random_dprl_policy(dim, 2, 1);
  missing_head.heads.pop_back();
  CHECK_THROWS_WITH(
      bsrl::evaluate(missing_head, {rig.rush_day}, rig.net, rig.fleet,
                     rig.episode, 0.0, 1, 1),
      Catch::Matchers::ContainsSubstring("head"));
}

TEST_CASE("evaluation inputs are validated") {
  EvalRig rig;
  CHECK_THROWS_AS(bsrl::evaluate(none_policy(), {}, rig.net, rig.fleet,
                                 rig.episode, 0.0, 1, 1),
                  bsrl::ConfigError);
  CHECK_THROWS_AS(bsrl::evaluate(none_policy(), {rig.quiet_day}, rig.net,
                                 rig.fleet, rig.episode, 1.5, 1, 1),
                  bsrl::ConfigError);
  CHECK_THROWS_AS(bsrl::evaluate(none_policy(), {rig.quiet_day}, rig.net,
                                 rig.fleet, rig.episode, 0.0, 0, 1),
                  bsrl::ConfigError);
}

TEST_CASE("report files mirror the in-memory report") {
  EvalRig rig;
  const auto report =
      bsrl::evaluate(none_policy(), {rig.rush_day, rig.quiet_day}, rig.net,
                     rig.fleet, rig.episode, 0.0, 1, 9);
  testsupport::TempDir dir("eval");

  const std::string csv_path = dir.file("report.csv");
  bsrl::write_report_csv(report, csv_path);
  CHECK(testsupport::slurp(csv_path) ==
        "policy,epsilon,day,rep,lost_rentals,lost_returns,total\n"
        "none,0,0,0,4,0,4\n"
        "none,0,1,0,0,0,0\n");

  const std::string json_path = dir.file("report.json");
  bsrl::write_report_json(report, json_path);
  const auto j = nlohmann::json::parse(testsupport::slurp(json_path));
  CHECK(j.at("policy") == "none");
  CHECK(j.at("episodes") == 2);
  CHECK(j.at("mean_total") == 2.0);
  CHECK(j.at("std_total") == 2.0);
  CHECK(j.at("std_formula") == "population");
  CHECK(j.at("config_digest") == report.config_digest);
}

TEST_CASE("training output plugs straight into evaluation") {
  bsrl::Rng rng(77);
  bsrl::StationNetwork net = testsupport::random_network(rng, 3, 3.0, 4, 8);
  bsrl::FleetConfig fleet;
  fleet.vehicle_count = 1;
  fleet.capacities = {4};
  fleet.initial_inventory = {2};
  fleet.initial_station = {0};
  fleet.handling_time = 0.5;
  bsrl::EpisodeConfig episode;
  episode.horizon_start = 420.0;
  episode.horizon_end = 460.0;
  episode.fill_levels = {0.2, 0.5, 0.8};
  episode.initial_station_inventory = {2, 2, 2};
  std::vector<bsrl::DemandScenario> days(1);
  days[0].trips = testsupport::random_trips(rng, 10, 3, 420.0, 460.0);

  bsrl::AgentConfig agent;
  agent.mode = bsrl::AgentMode::RIHR;
  agent.hidden_layers = {4};
  agent.train.total_steps = 30;
  agent.train.learning_starts = 10;
  agent.train.batch_size = 8;
  agent.train.seed = 5;

  const auto policy = bsrl::policy_from_training(
      agent, bsrl::train(agent, days, net, fleet, episode));
  CHECK(policy.id == "rihr");
  REQUIRE(policy.heads.size() == 1);
  const auto report =
      bsrl::evaluate(policy, days, net, fleet, episode, 0.0, 1, 3);
  CHECK(report.rows.size() == 1);
  CHECK(report.rows[0].total >= 0);
}
