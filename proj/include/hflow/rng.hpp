#pragma once

#include <cstdint>

namespace hflow {

// splitmix64. Reference stream for seed = 42:
//   0xbdd732262feb6e95, 0x28efe333b266f103, 0x47526757130f9f52
// Unit doubles take the top 53 bits: u = (x >> 11) * 2^-53, giving
//   0.7415648787718233, 0.1599103928769201, 0.27860113025513866
// for the same seed. Any reimplementation must reproduce these exactly.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // uniform in (-1, 1]
    double symmetric_unit() {
        return 2.0 * unit() - 1.0;
    }
};

} // namespace hflow
