#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace epimob {

/// SplitMix64 mixing step. Used for seed derivation and engine seeding.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stable stream derivation: mix(mix(mix(master) ^ run_index) ^ fnv1a(stage)).
/// Streams for one stage never change when other stages are added or removed.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t run_index,
                                    std::string_view stage) {
  return splitmix64(splitmix64(splitmix64(master_seed) ^ run_index) ^ fnv1a64(stage));
}

using RngEngine = std::mt19937_64;

inline RngEngine make_engine(std::uint64_t seed) { return RngEngine(splitmix64(seed)); }

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(RngEngine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n), n >= 1, by bitmask rejection.
inline std::uint64_t uniform_below(RngEngine& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  std::uint64_t mask = ~std::uint64_t{0};
  const std::uint64_t range = n - 1;
  mask >>= __builtin_clzll(range | 1);
  for (;;) {
    const std::uint64_t x = rng() & mask;
    if (x < n) return x;
  }
}

/// Exact binomial draw. Bernoulli loop for small n, std::binomial_distribution
/// otherwise. Deterministic for a given engine state on a given build.
std::int64_t binomial_draw(RngEngine& rng, std::int64_t n, double p);

}  // namespace epimob
