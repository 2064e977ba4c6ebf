#pragma once

#include <cstdint>
#include <random>

namespace otfs {

using Rng = std::mt19937_64;

/// Independent random stream roles inside one simulated frame.
enum class StreamRole : std::uint64_t { paths = 1, bits = 2, noise = 3 };

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for (master seed, frame index, role); streams never overlap across roles.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t frame, StreamRole role) {
    return mix64(mix64(mix64(master) ^ frame) ^ static_cast<std::uint64_t>(role));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t frame, StreamRole role) {
    return Rng(derive_seed(master, frame, role));
}

}  // namespace otfs
