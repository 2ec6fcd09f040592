#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ohtes {

/// Seeded pseudo-random stream. Copying an Rng copies its full state, including
/// the cached second normal variate, so copies replay identical draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Seed splitting: every stream seed is splitmix64(master ^ fnv1a(stream name)),
// and indexed sub-streams are splitmix64(seed + golden * (index + 1)).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ohtes
