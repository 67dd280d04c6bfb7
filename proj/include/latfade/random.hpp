#pragma once

#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

namespace latfade {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream id). Streams with different ids are
// decorrelated through seed_seq mixing; the same pair always yields the same
// sequence.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6c617466u};
  return Rng(seq);
}

// Derives a child seed, used to give each experiment stage its own stream family.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr const char* kWorkersEnv = "LATFADE_WORKERS";

// Worker count from LATFADE_WORKERS, defaulting to the logical core count.
inline unsigned worker_count() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

}  // namespace latfade
