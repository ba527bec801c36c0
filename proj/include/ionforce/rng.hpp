#pragma once

#include <cstdint>

namespace ionforce {

/// Counter-based random stream: every draw is a pure function of
/// (seed, stream, counter), so results do not depend on scheduling.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t bits(std::uint64_t counter) const;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ionforce
