#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace disentlab {

/// Seeded random stream with platform-independent draws.
///
/// std::mt19937_64 is fully specified by the standard, but the std
/// distributions are not, so every draw used by the pipeline goes through
/// the helpers below to keep runs reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Derive an independent child seed (splitmix64 of the next draw).
  std::uint64_t fork_seed();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace disentlab
