// Seeded RNG with explicit draw algorithms. std::*_distribution is
// implementation-defined, so uniform/normal are spelled out here to keep
// identical seeds giving identical streams on any toolchain.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fgwarp {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53 random bits
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range, Lemire's multiply-shift (bias < 2^-64, deterministic)
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = std::uint64_t(hi - lo) + 1;
        unsigned __int128 m = (unsigned __int128)gen_() * span;
        return lo + std::int64_t(std::uint64_t(m >> 64));
    }

    // Box-Muller, one value per call (the pair's partner is discarded)
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace fgwarp
