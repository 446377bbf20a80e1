#pragma once

#include <cstdint>
#include <random>

namespace mcbn {

// All randomness in the project flows from one u64 seed. Sub-streams are
// derived with splitmix64 so that independent stages (init, patch sampling,
// augmentation, stats estimation) draw from decorrelated generators and the
// derivation is documented and stable.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// seed = splitmix64(global_seed ^ splitmix64(stream_id))
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t stream_id) {
  return splitmix64(global_seed ^ splitmix64(stream_id));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t global_seed, std::uint64_t stream_id) {
  return Rng(derive_seed(global_seed, stream_id));
}

// Uniform in [0, 1). Drawn from the top 53 bits so the value does not depend
// on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-style rejection-free modulo would bias for huge n; n here is tiny
  // (image counts, pixel offsets), so 64-bit multiply-shift is exact enough.
  // Use rejection sampling to stay exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

}  // namespace mcbn
