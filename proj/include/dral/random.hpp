#pragma once

#include <cstdint>
#include <random>

namespace dral {

using Rng = std::mt19937_64;

/// Independent sub-streams of one trial seed. Each consumer owns its own engine.
enum class Stream : std::uint64_t {
    Truth = 1,
    Noise = 2,
    Initial = 3,
    Strategy = 4,
    Design = 5,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

} // namespace dral
