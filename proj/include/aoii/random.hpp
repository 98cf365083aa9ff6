#pragma once

#include <cstdint>
#include <random>

namespace aoii {

/**
 * Portable random stream.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard, and doubles are produced by taking the top 53 bits. No
 * std::*_distribution is involved, so a given seed yields the same stream
 * on every conforming platform.
 */
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Stream for replication `index` of an experiment seeded with `seed`.
    static RandomStream for_replication(std::uint64_t seed, std::uint64_t index) {
        return RandomStream(seed ^ index);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1).
    double uniform_open() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace aoii
