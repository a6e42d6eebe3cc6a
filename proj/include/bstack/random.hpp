#pragma once

#include <cstdint>
#include <random>

namespace bstack {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive the seed of an independent sub-stream from a root seed.
/// Streams are identified by small integers (chain index, fold index, ...).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return splitmix64(splitmix64(root) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t root, std::uint64_t stream = 0) {
  const std::uint64_t s = derive_seed(root, stream);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Engine(seq);
}

// Named subsystems for splitting the workflow's root seed.
enum class Stream : std::uint64_t { synth = 1, fit = 2, loo = 3, ppc = 4, compare = 5 };

inline std::uint64_t derive_seed(std::uint64_t root, Stream s) {
  return derive_seed(root, static_cast<std::uint64_t>(s) << 40);
}

}  // namespace bstack
