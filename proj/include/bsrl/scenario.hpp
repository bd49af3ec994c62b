#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "bsrl/common.hpp"
#include "bsrl/core.hpp"

namespace bsrl {

struct TripRecord {
  int origin = 0;
  double departure = 0.0;  // minutes since midnight
  int destination = 0;
  double arrival = 0.0;
};

struct DemandScenario {
  int day_index = 0;
  double weather_factor = 1.0;
  std::vector<TripRecord> trips;  // sorted by departure
};

struct PeakWindow {
  double start = 0.0;  // minutes since midnight
  double end = 0.0;
  double multiplier = 1.0;
};

struct GeneratorConfig {
  double base_rate = 900.0;  // expected trips per day at multiplier 1
  std::vector<PeakWindow> peak_windows{{420.0, 660.0, 3.0},
                                       {1020.0, 1200.0, 2.0}};
  double commute_bias = 0.6;   // fraction of peak trips forced outskirts->center
  double weather_sigma = 0.25; // lognormal sigma, median 1
  double rider_speed = 0.25;   // km/min
  // Empty attractiveness defaults to dock capacities; empty center list
  // defaults to stations with above-minimum capacity.
  std::vector<double> attractiveness;
  std::vector<int> center_stations;
};

namespace detail {

// Times are stored at millminute resolution so the CSV round-trip is exact:
// format at 3 decimals, then parse the result back.
inline double quantize_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", t);
  return std::strtod(buf, nullptr);
}

struct PairTable {
  std::vector<int> origin;
  std::vector<int> destination;
  std::vector<double> cumulative;
  double total = 0.0;

  void add(int o, int d, double w) {
    if (w <= 0.0) return;
    origin.push_back(o);
    destination.push_back(d);
    total += w;
    cumulative.push_back(total);
  }

  std::pair<int, int> sample(Rng& rng) const {
    const double u = rng.uniform() * total;
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t idx =
        std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    return {origin[idx], destination[idx]};
  }
};

struct Segment {
  double start;
  double end;
  double multiplier;
};

inline std::vector<Segment> day_segments(
    const std::vector<PeakWindow>& windows) {
  std::vector<PeakWindow> sorted = windows;
  std::sort(sorted.begin(), sorted.end(),
            [](const PeakWindow& a, const PeakWindow& b) {
              return a.start < b.start;
            });
  std::vector<Segment> segs;
  double cursor = 0.0;
  for (const auto& w : sorted) {
    if (w.start < 0.0 || w.end > 1440.0 || w.end <= w.start)
      throw ConfigError("peak window outside [0,1440] or empty");
    if (w.start < cursor) throw ConfigError("peak windows overlap");
    if (w.multiplier <= 0.0) throw ConfigError("peak multiplier must be > 0");
    if (w.start > cursor) segs.push_back({cursor, w.start, 1.0});
    segs.push_back({w.start, w.end, w.multiplier});
    cursor = w.end;
  }
  if (cursor < 1440.0) segs.push_back({cursor, 1440.0, 1.0});
  return segs;
}

}  // namespace detail

// Analytic expected trips per day, marginalized over weather:
// base_rate * time-weighted mean peak multiplier * E[lognormal(sigma)].
inline double expected_trips_per_day(const GeneratorConfig& config) {
  double weighted = 0.0;
  for (const auto& s : detail::day_segments(config.peak_windows))
    weighted += (s.end - s.start) * s.multiplier;
  const double mean_weather =
      std::exp(config.weather_sigma * config.weather_sigma / 2.0);
  return config.base_rate * (weighted / 1440.0) * mean_weather;
}

// Draw day_count days of trips. Per day: one lognormal weather multiplier,
// then a piecewise-constant-rate Poisson process over the day; station pairs
// follow a gravity model weight attract(o)*attract(d)/(1+D_od), except that a
// commute_bias fraction of trips inside peak windows is restricted to
// outskirts->center pairs. Each day uses its own (seed, day) substream.
inline std::vector<DemandScenario> generate_days(const StationNetwork& network,
                                                 const GeneratorConfig& config,
                                                 int day_count,
                                                 std::uint64_t seed) {
  const int n = network.station_count;
  if (n < 2) throw ConfigError("demand generation needs at least 2 stations");
  if (day_count < 1) throw ConfigError("day_count must be >= 1");
  if (config.base_rate < 0.0) throw ConfigError("base_rate must be >= 0");
  if (config.commute_bias < 0.0 || config.commute_bias > 1.0)
    throw ConfigError("commute_bias must lie in [0,1]");
  if (config.rider_speed <= 0.0) throw ConfigError("rider_speed must be > 0");
  if (config.weather_sigma < 0.0)
    throw ConfigError("weather_sigma must be >= 0");

  std::vector<double> attract = config.attractiveness;
  if (attract.empty()) {
    attract.assign(network.capacities.begin(), network.capacities.end());
  }
  if (static_cast<int>(attract.size()) != n)
    throw ConfigError("attractiveness size mismatch");

  std::vector<char> is_center(n, 0);
  if (config.center_stations.empty()) {
    const int min_cap =
        *std::min_element(network.capacities.begin(), network.capacities.end());
    for (int i = 0; i < n; ++i)
      if (network.capacities[i] > min_cap) is_center[i] = 1;
  } else {
    for (int s : config.center_stations) {
      if (s < 0 || s >= n) throw ConfigError("center station index invalid");
      is_center[s] = 1;
    }
  }

  detail::PairTable all_pairs;
  detail::PairTable commute_pairs;
  for (int o = 0; o < n; ++o) {
    for (int d = 0; d < n; ++d) {
      if (o == d) continue;
      const double w =
          attract[o] * attract[d] / (1.0 + network.distance[o][d]);
      all_pairs.add(o, d, w);
      if (!is_center[o] && is_center[d]) commute_pairs.add(o, d, w);
    }
  }
  if (all_pairs.total <= 0.0 && config.base_rate > 0.0)
    throw ConfigError("gravity weights sum to zero");
  const bool commute_possible = commute_pairs.total > 0.0;

  const auto segments = detail::day_segments(config.peak_windows);
  const double density = config.base_rate / 1440.0;

  std::vector<DemandScenario> days;
  days.reserve(day_count);
  for (int day = 0; day < day_count; ++day) {
    Rng rng(substream(seed, "demand-day", day));
    DemandScenario scen;
    scen.day_index = day;
    scen.weather_factor = rng.lognormal(config.weather_sigma);

    for (const auto& seg : segments) {
      const double rate =
          density * seg.multiplier * scen.weather_factor * (seg.end - seg.start);
      const std::int64_t count = rng.poisson(rate);
      const bool peak = seg.multiplier != 1.0;
      for (std::int64_t k = 0; k < count; ++k) {
        const double depart =
            detail::quantize_time(rng.uniform(seg.start, seg.end));
        const bool commute = peak && commute_possible &&
                             rng.uniform() < config.commute_bias;
        const auto [o, d] =
            commute ? commute_pairs.sample(rng) : all_pairs.sample(rng);
        double arrive = detail::quantize_time(
            depart + network.distance[o][d] / config.rider_speed);
        if (arrive <= depart) arrive = detail::quantize_time(depart + 0.001);
        scen.trips.push_back({o, depart, d, arrive});
      }
    }
    std::sort(scen.trips.begin(), scen.trips.end(),
              [](const TripRecord& a, const TripRecord& b) {
                return std::tie(a.departure, a.origin, a.destination,
                                a.arrival) < std::tie(b.departure, b.origin,
                                                      b.destination, b.arrival);
              });
    days.push_back(std::move(scen));
  }
  return days;
}

inline std::pair<std::vector<DemandScenario>, std::vector<DemandScenario>>
split_train_test(const std::vector<DemandScenario>& scenarios,
                 int train_count) {
  if (train_count <= 0 || train_count >= static_cast<int>(scenarios.size()))
    throw ConfigError("train_count must satisfy 0 < train_count < day count");
  return {std::vector<DemandScenario>(scenarios.begin(),
                                      scenarios.begin() + train_count),
          std::vector<DemandScenario>(scenarios.begin() + train_count,
                                      scenarios.end())};
}

// CSV layout: header `day,weather,origin,departure,destination,arrival`,
// one row per trip; a day without trips is kept as a single marker row with
// the last four fields empty so the round-trip preserves it.
inline void write_dataset(const std::vector<DemandScenario>& scenarios,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "day,weather,origin,departure,destination,arrival\n";
  char buf[160];
  for (const auto& day : scenarios) {
    if (day.trips.empty()) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,,,,\n", day.day_index,
                    day.weather_factor);
      out << buf;
      continue;
    }
    for (const auto& t : day.trips) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%.3f,%d,%.3f\n",
                    day.day_index, day.weather_factor, t.origin, t.departure,
                    t.destination, t.arrival);
      out << buf;
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline long parse_long(const std::string& s, const std::string& what,
                       int line_no) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty())
    throw DataError("line " + std::to_string(line_no) + ": bad " + what +
                    " '" + s + "'");
  return value;
}

inline double parse_double(const std::string& s, const std::string& what,
                           int line_no) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty())
    throw DataError("line " + std::to_string(line_no) + ": bad " + what +
                    " '" + s + "'");
  return value;
}

}  // namespace detail

inline std::vector<DemandScenario> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "day,weather,origin,departure,destination,arrival")
    throw DataError("'" + path + "': unexpected header '" + line + "'");

  std::vector<DemandScenario> days;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 6)
      throw DataError("line " + std::to_string(line_no) + ": expected 6 " +
                      "fields, got " + std::to_string(fields.size()));
    const int day = static_cast<int>(
        detail::parse_long(fields[0], "day", line_no));
    const double weather =
        detail::parse_double(fields[1], "weather", line_no);
    if (weather <= 0.0)
      throw DataError("line " + std::to_string(line_no) +
                      ": weather must be > 0");

    if (days.empty() || days.back().day_index != day) {
      for (const auto& prev : days)
        if (prev.day_index == day)
          throw DataError("line " + std::to_string(line_no) + ": day " +
                          std::to_string(day) + " appears twice");
      days.push_back({day, weather, {}});
    } else if (days.back().weather_factor != weather) {
      throw DataError("line " + std::to_string(line_no) +
                      ": weather changes within day " + std::to_string(day));
    }

    const bool marker = fields[2].empty() && fields[3].empty() &&
                        fields[4].empty() && fields[5].empty();
    if (marker) {
      if (!days.back().trips.empty())
        throw DataError("line " + std::to_string(line_no) +
                        ": empty-day marker after trips");
      continue;
    }
    TripRecord t;
    t.origin = static_cast<int>(detail::parse_long(fields[2], "origin", line_no));
    t.departure = detail::parse_double(fields[3], "departure", line_no);
    t.destination =
        static_cast<int>(detail::parse_long(fields[4], "destination", line_no));
    t.arrival = detail::parse_double(fields[5], "arrival", line_no);
    if (t.origin == t.destination)
      throw DataError("line " + std::to_string(line_no) +
                      ": origin equals destination");
    if (!(t.arrival > t.departure))
      throw DataError("line " + std::to_string(line_no) +
                      ": arrival does not exceed departure");
    if (!days.back().trips.empty() &&
        t.departure < days.back().trips.back().departure)
      throw DataError("line " + std::to_string(line_no) +
                      ": departures out of order within day");
    days.back().trips.push_back(t);
  }
  return days;
}

}  // namespace bsrl
