#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace beamshift {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, index), so draws never depend on evaluation order.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index) noexcept {
  return static_cast<double>(mix_seed(seed, stream, index) >> 11) * 0x1.0p-53;
}

/// Standard normal draw via Box-Muller on two counter uniforms.
inline double counter_normal(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index) noexcept {
  const double u1 = 1.0 - counter_uniform(seed, stream, 2 * index);  // (0, 1]
  const double u2 = counter_uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Stream tags keep independent consumers of one seed apart.
namespace streams {
inline constexpr std::uint64_t kBeamMask = 0x6d61736bULL;
inline constexpr std::uint64_t kBeamInterp = 0x696e7470ULL;
inline constexpr std::uint64_t kRangeNoise = 0x6e6f6973ULL;
inline constexpr std::uint64_t kFrameSeed = 0x6672616dULL;
inline constexpr std::uint64_t kSceneLayout = 0x6c61796fULL;
}  // namespace streams

}  // namespace beamshift
