#pragma once

#include <cstdint>
#include <random>

namespace sdw {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent seed streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return mix_seed(mix_seed(a, b, c), d);
}

/// Uniform double in [0, 1). Consumes exactly one engine draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased uniform index in [0, n). n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

/// Stream salts. Training, evaluation and probing never share episode seeds.
namespace stream {
inline constexpr std::uint64_t kLayout = 0x4c41594fULL;
inline constexpr std::uint64_t kTrainEpisode = 0x5452414eULL;
inline constexpr std::uint64_t kEvalEpisode = 0x4556414cULL;
inline constexpr std::uint64_t kProbe = 0x50524f42ULL;
inline constexpr std::uint64_t kActor = 0x4143544fULL;
inline constexpr std::uint64_t kReplay = 0x5245504cULL;
inline constexpr std::uint64_t kInit = 0x494e4954ULL;
inline constexpr std::uint64_t kFisher = 0x46495348ULL;
}  // namespace stream

}  // namespace sdw
