#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <bsrl/core.hpp>
#include <bsrl/policies.hpp>
#include <bsrl/sim.hpp>

#include "support/builders.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bsrl::RoutingContext three_station_context() {
  bsrl::RoutingContext ctx;
  ctx.station = 0;
  ctx.distance_row = {0.0, 1.0, 3.0};
  ctx.station_inventory = {0, 0, 0};
  ctx.station_capacity = {10, 10, 10};
  ctx.load = 0;
  ctx.vehicle_capacity = 4;
  ctx.mask = {0, 1, 1};
  return ctx;
}

bsrl::RoutingContext random_context(bsrl::Rng& rng) {
  bsrl::RoutingContext ctx;
  const int n = rng.uniform_int(2, 8);
  ctx.station = 0;
  ctx.distance_row.resize(n);
  ctx.station_inventory.resize(n);
  ctx.station_capacity.resize(n);
  ctx.mask.assign(n, 0);
  ctx.vehicle_capacity = rng.uniform_int(1, 10);
  ctx.load = static_cast<int>(rng.uniform_index(ctx.vehicle_capacity + 1));
  int unmasked = 0;
  for (int i = 0; i < n; ++i) {
    ctx.distance_row[i] = rng.uniform(0.1, 9.0);
    ctx.station_capacity[i] = rng.uniform_int(2, 40);
    ctx.station_inventory[i] =
        static_cast<int>(rng.uniform_index(ctx.station_capacity[i] + 1));
    ctx.mask[i] = rng.uniform() < 0.7 ? 1 : 0;
    unmasked += ctx.mask[i];
  }
  if (unmasked == 0) ctx.mask[rng.uniform_index(n)] = 1;
  return ctx;
}

// One vehicle standing at `station` of a short line, inventories and load
// chosen by the caller; enough state to drive the target-level rule.
struct Rig {
  bsrl::StationNetwork net;
  bsrl::FleetConfig fleet;
  bsrl::EpisodeConfig episode;
  bsrl::DemandScenario day;

  Rig(std::vector<int> caps, std::vector<int> inventory, int vehicle_cap,
      int vehicle_load, int station) {
    const int n = static_cast<int>(caps.size());
    net.station_count = n;
    net.capacities = std::move(caps);
    net.coordinates.resize(n);
    net.distance.assign(n, std::vector<double>(n, 2.0));
    net.transit_time.assign(n, std::vector<double>(n, 4.0));
    for (int i = 0; i < n; ++i) {
      net.coordinates[i] = {2.0 * i, 0.0};
      net.distance[i][i] = 0.0;
      net.transit_time[i][i] = 0.0;
    }
    fleet.vehicle_count = 1;
    fleet.capacities = {vehicle_cap};
    fleet.initial_inventory = {vehicle_load};
    fleet.initial_station = {station};
    fleet.handling_time = 0.5;
    episode.horizon_start = 420.0;
    episode.horizon_end = 480.0;
    episode.fill_levels = {0.2, 0.5, 0.8};
    episode.initial_station_inventory = std::move(inventory);
  }

  bsrl::SimState sim() const {
    return bsrl::SimState(net, fleet, episode, day, 0);
  }
};

}  // namespace

TEST_CASE("balance score peaks at perfect mismatches and is exactly symmetric") {
  CHECK(bsrl::balance_score(0, 10, 0, 5) == 0.0);   // empty meets empty
  CHECK(bsrl::balance_score(0, 10, 5, 5) == 1.0);   // full vehicle, empty dock
  CHECK(bsrl::balance_score(10, 10, 0, 5) == 1.0);  // empty vehicle, full dock
  CHECK(bsrl::balance_score(5, 10, 2, 4) == 0.5);   // both at half

  bsrl::Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const int c = rng.uniform_int(1, 100);
    const int d = static_cast<int>(rng.uniform_index(c + 1));
    const int vc = rng.uniform_int(1, 50);
    const int p = static_cast<int>(rng.uniform_index(vc + 1));
    // complementing both the station fill and the vehicle load is a no-op,
    // bit for bit
    CHECK(bsrl::balance_score(d, c, p, vc) ==
          bsrl::balance_score(c - d, c, vc - p, vc));
  }
}

TEST_CASE("zero exponent yields the exact uniform over unmasked stations") {
  const auto u =
      bsrl::routing_distribution(three_station_context(), {0.5, 0.0});
  CHECK(u[0] == 0.0);
  CHECK(u[1] == 0.5);
  CHECK(u[2] == 0.5);

  bsrl::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto ctx = random_context(rng);
    const auto dist = bsrl::routing_distribution(ctx, {rng.uniform(), 0.0});
    int unmasked = 0;
    for (char m : ctx.mask) unmasked += m;
    for (size_t j = 0; j < dist.size(); ++j)
      CHECK(dist[j] == (ctx.mask[j] ? 1.0 / unmasked : 0.0));
  }
}

TEST_CASE("pure distance weighting at exponent one follows inverse distance") {
  // stations at distance 1 and 3: weights 1 and 1/3 normalize to 3/4 and 1/4
  const auto u =
      bsrl::routing_distribution(three_station_context(), {1.0, 1.0});
  CHECK(u[0] == 0.0);
  CHECK_THAT(u[1], Catch::Matchers::WithinAbs(0.75, 1e-12));
  CHECK_THAT(u[2], Catch::Matchers::WithinAbs(0.25, 1e-12));
}

TEST_CASE("infinite exponent is a point mass on the greedy station") {
  SECTION("a full vehicle heads for the empty station regardless of distance") {
    bsrl::RoutingContext ctx;
    ctx.station = 0;
    ctx.distance_row = {0.5, 9.0, 2.0};
    ctx.station_inventory = {5, 0, 7};
    ctx.station_capacity = {10, 10, 10};
    ctx.load = 4;
    ctx.vehicle_capacity = 4;
    ctx.mask = {1, 1, 1};
    const auto u = bsrl::routing_distribution(ctx, {0.0, kInf});
    CHECK(u == std::vector<double>{0.0, 1.0, 0.0});
  }
  SECTION("pure distance blend picks the nearest unmasked station") {
    auto ctx = three_station_context();
    ctx.distance_row = {0.0, 2.0, 1.0};
    const auto u = bsrl::routing_distribution(ctx, {1.0, kInf});
    CHECK(u == std::vector<double>{0.0, 0.0, 1.0});
  }
  SECTION("exact ties resolve to the lowest station index") {
    auto ctx = three_station_context();
    ctx.distance_row = {0.0, 2.0, 2.0};
    const auto u = bsrl::routing_distribution(ctx, {1.0, kInf});
    CHECK(u == std::vector<double>{0.0, 1.0, 0.0});
  }
  SECTION("all-zero balance scores fall back to the lowest unmasked index") {
    // empty vehicle, empty stations: every score is zero
    const auto u =
        bsrl::routing_distribution(three_station_context(), {0.0, kInf});
    CHECK(u == std::vector<double>{0.0, 1.0, 0.0});
  }
}

TEST_CASE("infinite exponent matches a large finite exponent at pure blends") {
  for (double alpha : {0.0, 1.0}) {
    bsrl::Rng rng(alpha == 0.0 ? 11 : 12);
    int checked = 0;
    int guard = 0;
    while (checked < 200 && ++guard < 20000) {
      const auto ctx = random_context(rng);
      const auto u8 = bsrl::routing_distribution(ctx, {alpha, 8.0});
      int best = 0;
      for (size_t i = 1; i < u8.size(); ++i)
        if (u8[i] > u8[best]) best = static_cast<int>(i);
      double second = -1.0;
      for (size_t i = 0; i < u8.size(); ++i)
        if (static_cast<int>(i) != best) second = std::max(second, u8[i]);
      if (u8[best] - second < 1e-9) continue;  // near-tie: not informative
      const auto point = bsrl::routing_distribution(ctx, {alpha, kInf});
      INFO("alpha " << alpha << " state " << checked);
      REQUIRE(point[best] == 1.0);
      ++checked;
    }
    CHECK(checked == 200);
  }
}

TEST_CASE("blended distributions are normalized, nonnegative, and masked") {
  bsrl::Rng rng(23);
  const double exponents[] = {0.0, 0.5, 1.0, 2.0, 8.0, kInf};
  const double alphas[] = {0.0, 0.3, 0.5, 1.0};
  for (int trial = 0; trial < 25; ++trial) {
    const auto ctx = random_context(rng);
    for (double alpha : alphas)
      for (double m : exponents) {
        const auto u = bsrl::routing_distribution(ctx, {alpha, m});
        double total = 0.0;
        for (size_t i = 0; i < u.size(); ++i) {
          INFO("trial " << trial << " alpha " << alpha << " m " << m
                        << " station " << i);
          CHECK(u[i] >= 0.0);
          if (!ctx.mask[i]) CHECK(u[i] == 0.0);
          total += u[i];
        }
        CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-9));
      }
  }
}

TEST_CASE("routing distribution rejects malformed contexts") {
  using Catch::Matchers::ContainsSubstring;
  const auto base = three_station_context();

  CHECK_THROWS_WITH(bsrl::routing_distribution(base, {-0.1, 1.0}),
                    ContainsSubstring("alpha"));
  CHECK_THROWS_WITH(bsrl::routing_distribution(base, {1.1, 1.0}),
                    ContainsSubstring("alpha"));
  CHECK_THROWS_WITH(bsrl::routing_distribution(base, {0.5, -1.0}),
                    ContainsSubstring("exponent"));

  auto ctx = base;
  ctx.mask = {0, 0, 0};
  CHECK_THROWS_WITH(bsrl::routing_distribution(ctx, {0.5, 1.0}),
                    ContainsSubstring("allows no station"));

  ctx = base;
  ctx.distance_row[1] = 0.0;  // unmasked station at distance zero
  CHECK_THROWS_WITH(bsrl::routing_distribution(ctx, {0.5, 1.0}),
                    ContainsSubstring("non-positive distance"));

  ctx = base;
  ctx.distance_row.pop_back();
  CHECK_THROWS_WITH(bsrl::routing_distribution(ctx, {0.5, 1.0}),
                    ContainsSubstring("disagree in length"));
}

TEST_CASE("sampling a point mass always returns its index") {
  std::vector<double> point(10, 0.0);
  point[7] = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    bsrl::Rng rng(seed);
    for (int i = 0; i < 50; ++i) CHECK(bsrl::sample_routing(point, rng) == 7);
  }
}

TEST_CASE("sampling follows the distribution and is reproducible per seed") {
  const std::vector<double> dist = {0.5, 0.25, 0.25};

  bsrl::Rng a(99), b(99);
  for (int i = 0; i < 100; ++i)
    REQUIRE(bsrl::sample_routing(dist, a) == bsrl::sample_routing(dist, b));

  bsrl::Rng rng(4);
  std::array<int, 3> counts{0, 0, 0};
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++counts[bsrl::sample_routing(dist, rng)];
  for (int i = 0; i < 3; ++i)
    CHECK_THAT(static_cast<double>(counts[i]) / draws,
               Catch::Matchers::WithinAbs(dist[i], 0.02));
}

TEST_CASE("sampling rejects vectors that are not probability distributions") {
  using Catch::Matchers::ContainsSubstring;
  bsrl::Rng rng(1);
  std::vector<double> negative = {0.6, -0.1, 0.5};
  CHECK_THROWS_WITH(bsrl::sample_routing(negative, rng),
                    ContainsSubstring("negative"));
  std::vector<double> short_sum = {0.4, 0.4};
  CHECK_THROWS_WITH(bsrl::sample_routing(short_sum, rng),
                    ContainsSubstring("sum to 1"));
  std::vector<double> zeros = {0.0, 0.0};
  CHECK_THROWS_WITH(bsrl::sample_routing(zeros, rng),
                    ContainsSubstring("all zero"));
}

TEST_CASE("live simulator contexts mask the vehicle's own station") {
  Rig r({10, 10}, {5, 5}, 4, 2, 0);
  auto sim = r.sim();
  const auto u = bsrl::routing_distribution(sim, 0, {0.5, 1.0});
  REQUIRE(u.size() == 2);
  CHECK(u[0] == 0.0);
  CHECK(u[1] == 1.0);
}

TEST_CASE("target-level rule moves the station toward its target") {
  SECTION("surplus station, empty vehicle: pick up the difference") {
    Rig r({40, 40}, {30, 5}, 40, 0, 0);
    auto sim = r.sim();
    CHECK(bsrl::target_level_inventory(sim, 0, {{20, 20}}) == 10);
  }
  SECTION("already at target: do nothing") {
    Rig r({40, 40}, {20, 5}, 40, 0, 0);
    auto sim = r.sim();
    CHECK(bsrl::target_level_inventory(sim, 0, {{20, 20}}) == 0);
  }
  SECTION("deficit station: drop off no more than the vehicle carries") {
    Rig r({40, 40}, {30, 5}, 40, 3, 1);
    auto sim = r.sim();
    CHECK(bsrl::target_level_inventory(sim, 0, {{20, 20}}) == -3);
  }
  SECTION("drop-offs stop at the station's free docks") {
    Rig r({40, 40}, {39, 5}, 40, 10, 0);
    auto sim = r.sim();
    CHECK(bsrl::target_level_inventory(sim, 0, {{45, 20}}) == -1);
  }
  SECTION("target vector must cover every station") {
    Rig r({40, 40}, {30, 5}, 40, 0, 0);
    auto sim = r.sim();
    CHECK_THROWS_AS(bsrl::target_level_inventory(sim, 0, {{20}}),
                    bsrl::ConfigError);
  }
}

TEST_CASE("empirical targets default to half capacity without demand") {
  bsrl::StationNetwork net;
  net.station_count = 2;
  net.capacities = {5, 4};
  std::vector<bsrl::DemandScenario> days(3);
  const auto targets = bsrl::compute_empirical_targets(days, net, 420.0, 480.0);
  CHECK(targets.ideal == std::vector<int>{3, 2});  // 2.5 rounds half-up
}

TEST_CASE("empirical targets rise for sources and fall for sinks") {
  bsrl::StationNetwork net;
  net.station_count = 3;
  net.capacities = {10, 10, 4};

  SECTION("window filtering and the sign of the net flow") {
    std::vector<bsrl::DemandScenario> days(1);
    auto& trips = days[0].trips;
    // station 0 sources two rentals inside the window; both arrive after it
    trips.push_back({0, 430.0, 1, 490.0});
    trips.push_back({0, 440.0, 1, 495.0});
    // station 1 absorbs two returns inside the window from pre-window rentals
    trips.push_back({2, 410.0, 1, 425.0});
    trips.push_back({2, 415.0, 1, 435.0});
    const auto targets =
        bsrl::compute_empirical_targets(days, net, 420.0, 480.0);
    CHECK(targets.ideal[0] == 7);  // 5 + 2
    CHECK(targets.ideal[1] == 3);  // 5 - 2
    CHECK(targets.ideal[2] == 2);  // pre-window rentals don't count
  }

  SECTION("flows average across days and round half-up") {
    std::vector<bsrl::DemandScenario> days(2);
    days[0].trips.push_back({0, 430.0, 1, 490.0});  // one rental in two days
    const auto targets =
        bsrl::compute_empirical_targets(days, net, 420.0, 480.0);
    CHECK(targets.ideal[0] == 6);  // 5 + 0.5 rounds up
  }

  SECTION("targets clamp to the physical dock range") {
    std::vector<bsrl::DemandScenario> days(1);
    for (int i = 0; i < 10; ++i) {
      days[0].trips.push_back({2, 425.0 + i, 0, 500.0});  // drain station 2
      days[0].trips.push_back({1, 400.0, 0, 430.0 + i});  // flood station 0
    }
    const auto targets =
        bsrl::compute_empirical_targets(days, net, 420.0, 480.0);
    CHECK(targets.ideal[2] == 4);  // 2 + 10 clamps to capacity
    CHECK(targets.ideal[0] == 0);  // 5 - 10 clamps to zero
  }

  SECTION("at least one training day is required") {
    CHECK_THROWS_AS(
        bsrl::compute_empirical_targets({}, net, 420.0, 480.0),
        bsrl::ConfigError);
  }
}
