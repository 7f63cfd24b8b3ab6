#pragma once

#include <cstdint>
#include <random>

namespace gpode {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream seed for (seed, i, j). Every sampler keys its per-item RNG on this
/// so results do not depend on how work is split across threads.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i, std::uint64_t j = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (i + 0x632BE59BD9B4E019ULL)) ^ (j + 0x85157AF5ULL));
}

[[nodiscard]] inline Rng make_rng(std::uint64_t seed, std::uint64_t i, std::uint64_t j = 0) {
  return Rng(derive_seed(seed, i, j));
}

}  // namespace gpode
