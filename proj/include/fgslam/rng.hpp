#pragma once

#include <cstdint>
#include <random>

namespace fgslam {

/// splitmix64; used to derive independent stream seeds from a master seed.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return mix_seed(master ^ mix_seed(stream));
}

using Rng = std::mt19937_64;

}  // namespace fgslam
