// Seeded sub-stream derivation. All randomness in the pipeline flows from one
// user seed through named streams so that per-pixel work is order-independent.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace perfquant {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for the sub-stream `name` of the master seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    return splitmix64(seed ^ fnv1a(name));
}

/// Indexed sub-stream (per pixel, per start, ...).
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name,
                                    std::uint64_t index) {
    return splitmix64(substream_seed(seed, name) ^ splitmix64(index + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace perfquant
