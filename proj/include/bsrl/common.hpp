#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bsrl {

// Bad inputs (files, CLI, config structs). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed data encountered while reading datasets, checkpoints, reports.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Engine invariant breach; carries a diagnostic dump of the offending state.
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Every random draw in the project flows from one root seed through named
// substreams, so any single stage (dataset, weights, exploration, ...) can
// be replayed in isolation.
inline std::uint64_t substream(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

inline std::uint64_t substream(std::uint64_t root, std::string_view name,
                               std::uint64_t index) {
  return splitmix64(substream(root, name) + 0x632be59bd9b4e019ull * (index + 1));
}

// mt19937_64 plus hand-rolled samplers: the standard pins the engine but not
// the distributions, and reruns must be bit-reproducible.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), unbiased via rejection
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InternalError("uniform_index: empty range");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_index(
                    static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Box-Muller, no cached spare so the draw count per call is fixed
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double lognormal(double sigma) { return std::exp(sigma * normal()); }

  // Exact Poisson sampling; large means are split into chunks so the
  // exp(-lambda) product never underflows.
  long poisson(double mean) {
    if (mean < 0.0) throw InternalError("poisson: negative mean");
    long total = 0;
    while (mean > 400.0) {
      total += poisson_small(400.0);
      mean -= 400.0;
    }
    return total + poisson_small(mean);
  }

 private:
  long poisson_small(double mean) {
    const double threshold = std::exp(-mean);
    long k = 0;
    double prod = uniform();
    while (prod > threshold) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

  std::mt19937_64 engine_;
};

// nearest integer, ties rounded up; used wherever fractional dock targets
// must become whole docks
inline int round_half_up(double x) {
  return static_cast<int>(std::floor(x + 0.5));
}

}  // namespace bsrl
