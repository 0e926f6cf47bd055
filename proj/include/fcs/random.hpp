#pragma once

// Counter-based Gaussian sampling: every draw is a pure function of
// (seed, stream, index, component), so increments can be replayed and paths
// generated in any order or in parallel with identical results.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fcs::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t index,
                             std::uint64_t component) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ (index * 0xD1B54A32D192ED03ULL));
    return splitmix64(h ^ (component + 0x632BE59BD9B4E019ULL));
}

/// Uniform on (0, 1), never 0.
inline double to_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller from two counter draws.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, std::uint64_t component) noexcept {
    double u1 = to_unit(hash(seed, stream, index, 2 * component));
    double u2 = to_unit(hash(seed, stream, index, 2 * component + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// FNV-1a over raw bytes of a double sequence; used to check that two
/// consumers saw identical increments.
template <typename Range>
std::uint64_t checksum(const Range& values) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double v : values) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        __builtin_memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFFU;
            h *= 0x100000001B3ULL;
        }
    }
    return h;
}

}  // namespace fcs::rng
