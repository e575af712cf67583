#pragma once

#include <cstdint>
#include <random>

namespace fermi {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (master seed, purpose tag, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(tag)) + index);
}

namespace stream {
inline constexpr std::uint64_t kEnvAgent = 0x656e762d61676e74ULL;
inline constexpr std::uint64_t kEnvMac = 0x656e762d6d616321ULL;
inline constexpr std::uint64_t kLearner = 0x6c6561726e657221ULL;
inline constexpr std::uint64_t kPolicy = 0x706f6c6963792121ULL;
inline constexpr std::uint64_t kEpisode = 0x6570697364652121ULL;
}  // namespace stream

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline int uniform_int(Rng& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

}  // namespace fermi
