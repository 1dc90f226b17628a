#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tseq {

// splitmix64 finalizer; decorrelates seeds derived from small integers.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable per-purpose seed: one master seed fans out to independent streams
// keyed by a tag (parameter array name, "shuffle", epoch number, ...).
// Streams stay put when unrelated arrays are added or removed.
inline std::uint64_t seed_for(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(seed ^ h);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view tag) {
  return std::mt19937_64(seed_for(seed, tag));
}

}  // namespace tseq
