#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gridrecon {

/// Independent named random streams derived from one root seed. Changing how
/// much one stream is consumed never shifts another.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t derive(std::string_view name) const;
  std::mt19937_64 stream(std::string_view name) const { return std::mt19937_64(derive(name)); }

 private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Standard normal via Box-Muller on the engine's raw output, so draws do not
/// depend on the standard library's distribution implementation.
double standard_normal(std::mt19937_64& rng);
double uniform01(std::mt19937_64& rng);
/// Laplace variate with the given standard deviation.
double laplace(std::mt19937_64& rng, double stddev);

}  // namespace gridrecon
