#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace frame_sampler {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

/// Seed for sub-stream `index` of `parent`.
///
/// For a fixed parent this is injective in `index`: parent + index * gamma is
/// distinct modulo 2^64 for distinct indices (gamma is odd) and mix64 is a
/// bijection. Replication r of a run uses derive_seed(master, r).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
    constexpr std::uint64_t gamma = 0x9e3779b97f4a7c15ULL;
    return mix64(parent + (index + 1) * gamma);
}

/// FNV-1a, used to turn stream labels into sub-stream indices.
constexpr std::uint64_t label_hash(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
    return derive_seed(parent, label_hash(label));
}

/// Uniform draw on the open interval (0, 1) with 53-bit resolution.
inline double uniform_open01(Rng &rng) {
    for (;;) {
        const double u = static_cast<double>(rng() >> 11U) * 0x1.0p-53;
        if (u > 0.0) {
            return u;
        }
    }
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng &rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>{0, n - 1}(rng);
}

/// Normal(mean, sd); sd == 0 returns the mean exactly without consuming the stream.
inline double normal_draw(Rng &rng, double mean, double sd) {
    if (sd == 0.0) {
        return mean;
    }
    return std::normal_distribution<double>{mean, sd}(rng);
}

/// Inverse-Gamma(shape, scale) draw.
inline double inverse_gamma_draw(Rng &rng, double shape, double scale) {
    const double g = std::gamma_distribution<double>{shape, 1.0}(rng);
    return scale / g;
}

} // namespace frame_sampler
