#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace seal {

// Portable seeded generator. The engine is mt19937_64 (bit-exact across
// standard libraries); the distributions below are spelled out here because
// the <random> distributions are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1) with 53 random bits
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi], by rejection
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % span);
    }

    // Box-Muller, one draw per call
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = last - first;
        for (auto i = n - 1; i > 0; --i) {
            std::swap(first[i], first[uniform_int(0, i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace seal
