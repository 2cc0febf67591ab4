#pragma once

#include <cstdint>
#include <random>

namespace rapo {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `stream` of `seed`. Every random stream in the
/// project is derived this way from a single top-level seed, so a run is
/// fully determined by (seed, stream path).
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(split_seed(seed, stream)); }

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
/// Spelled out instead of std::uniform_real_distribution so the bit stream
/// does not depend on the standard library implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Named stream identifiers under the top-level seed.
namespace streams {
inline constexpr std::uint64_t tasks = 1;
inline constexpr std::uint64_t reference = 2;
inline constexpr std::uint64_t train = 3;
inline constexpr std::uint64_t eval = 4;
inline constexpr std::uint64_t hard = 5;
inline constexpr std::uint64_t verify = 6;
}  // namespace streams

}  // namespace rapo
