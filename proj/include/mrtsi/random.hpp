#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mrtsi {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-seed for (seed, k1, k2, ...). Independent of any
/// scheduling order, so parallel replications reproduce serial ones.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = mix64(seed);
    for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

// Stream tags.
enum class Stream : std::uint64_t {
    Data = 1,
    NuisanceSplit = 2,
    Randomization = 3,
    LambdaRule = 4,
    FoldSplit = 5,
    Truth = 6,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s, std::uint64_t index = 0) {
    return derive_seed(seed, {static_cast<std::uint64_t>(s), index});
}

}  // namespace mrtsi
