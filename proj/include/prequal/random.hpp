#pragma once

#include <cstdint>
#include <random>

namespace prequal {

using Rng = std::mt19937_64;

// Independent named streams keep, for example, the antagonist trajectory
// identical across runs that differ only in policy.
enum class Stream : std::uint32_t {
  kArrivals = 1,
  kWork = 2,
  kAntagonist = 3,
  kNetwork = 4,
  kPolicy = 5,
  kProbeTargets = 6,
};

// `substream` separates per-entity streams (one per client, say).
inline Rng make_rng(std::uint64_t master_seed, std::uint64_t run_index,
                    Stream stream, std::uint32_t substream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(run_index),
                    static_cast<std::uint32_t>(run_index >> 32),
                    static_cast<std::uint32_t>(stream), substream};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace prequal
