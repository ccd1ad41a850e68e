#pragma once

#include <cstdint>
#include <random>

namespace coherent {

using Rng = std::mt19937_64;

/// Independent stream for one path, keyed by (master seed, path index).
/// The stream depends only on the key, so any schedule of paths reproduces it.
inline Rng path_stream(std::uint64_t master_seed, std::uint64_t path_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32),
                    0x636f6865u};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Geometric variate on {1, 2, ...} with P(Z = j) = rho (1 - rho)^(j-1).
inline std::uint64_t geometric_from_one(Rng& rng, double rho) {
  if (rho >= 1.0) return 1;
  return 1 + std::geometric_distribution<std::uint64_t>(rho)(rng);
}

}  // namespace coherent
