#pragma once

#include "predsub/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace predsub {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based stream derivation: the seed for a sub-stream is a pure
/// function of the master seed and the stream coordinates, so parallel
/// workers reproduce the same draws regardless of scheduling.
inline Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = detail::splitmix64(master ^ 0x5851f42d4c957f2dULL);
    for (std::uint64_t c : coords) {
        h = detail::splitmix64(h ^ detail::splitmix64(c + 0x632be59bd9b4e019ULL));
    }
    return h;
}

inline Engine make_engine(Seed master, std::initializer_list<std::uint64_t> coords) {
    return Engine(derive_seed(master, coords));
}

/// Stream tags keep unrelated consumers of one master seed apart.
namespace stream {
inline constexpr std::uint64_t kModel = 1;
inline constexpr std::uint64_t kAdjacency = 2;
inline constexpr std::uint64_t kSubsample = 3;
inline constexpr std::uint64_t kBootstrap = 4;
inline constexpr std::uint64_t kReplicate = 5;
inline constexpr std::uint64_t kInclusion = 6;
inline constexpr std::uint64_t kStart = 7;
}  // namespace stream

}  // namespace predsub
