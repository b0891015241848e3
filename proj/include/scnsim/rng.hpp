#pragma once

#include <cstdint>

namespace scnsim {

// Stateless counter-based generator. Every variate is a pure function of
// (seed, stream, counter), so parallel consumers draw identical numbers
// regardless of evaluation order.
namespace rng {

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

inline std::uint64_t key(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return mix64(h ^ (0xbf58476d1ce4e5b9ULL * (counter + 1)));
}

/// Uniform double in [0, 1) from a (seed, stream, counter) triple.
inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
  return static_cast<double>(key(seed, stream, counter) >> 11) * 0x1.0p-53;
}

}  // namespace rng
}  // namespace scnsim
