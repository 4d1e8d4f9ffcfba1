#pragma once

#include <cstdint>
#include <random>

namespace hdmed {

// SplitMix64 finalizer; a good 64-bit mixer for deriving stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of substream `stream` under `seed`. Streams depend only on the pair,
// never on evaluation order.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return split_seed(split_seed(seed, a), b);
}

using Rng = std::mt19937_64;

}  // namespace hdmed
