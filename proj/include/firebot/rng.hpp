#pragma once

#include <cstdint>
#include <random>

namespace firebot {

/// Named random streams so that each consumer draws from its own sequence.
enum class Stream : std::uint64_t {
    odometry = 1,
    thermal = 2,
    depth = 3,
    depth_plate = 4,
    scan2d = 5,
    scan3d = 6,
    waypoints = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Engine keyed by (run seed, stream, index). Two calls with the same key
/// return engines producing identical sequences.
inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ index);
    return std::mt19937_64(h);
}

}  // namespace firebot
