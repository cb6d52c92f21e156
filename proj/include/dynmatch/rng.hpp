#pragma once

#include <cstdint>
#include <random>

namespace dynmatch {

// SplitMix64 step; used to decorrelate (seed, stream-id) pairs before
// seeding the main generator.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic per-(seed, stream) generator. mt19937_64 output is fixed by
// the standard, so sequences are reproducible across platforms.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream + 1)));
}

// Maps one 64-bit draw to a double in [0, 1).
inline double to_unit_interval(std::uint64_t u) {
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

}  // namespace dynmatch
