#pragma once

#include <cstdint>
#include <random>

namespace crowdstream {

// All randomness in the library flows through this engine so that a seed
// fully determines an experiment.
using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent per-run seeds from a
// master seed and a counter.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(master ^ splitmix64(stream + 1));
}

// Uniform double in [0, 1) from the top 53 bits. Unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fair ±1 coin.
inline int fair_sign(Rng& rng) {
    return (rng() >> 63) != 0 ? 1 : -1;
}

}  // namespace crowdstream
