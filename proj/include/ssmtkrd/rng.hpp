#pragma once

#include <cstdint>

namespace ssmtkrd {

// splitmix64: expands a 64-bit seed into well-mixed words. Used both to
// seed xoshiro and to derive independent substreams (seed ^ salt).
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

// xoshiro256++ seeded through splitmix64. All draws used for tensor
// initialization go through this generator so checkpoint bytes are
// reproducible across platforms (no std:: distributions anywhere).
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Float in [0, 1) from the top 24 bits of one output word.
    float uniform01() { return float(next() >> 40) * (1.0f / 16777216.0f); }

    float uniform(float lo, float hi) { return lo + uniform01() * (hi - lo); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// exp(x) for x in [0, 8] evaluated with a fixed-order series so weight
// initialization does not depend on the host libm. Inputs outside that
// range fall back to std::exp (never hit by the initializers).
double det_exp(double x);

}  // namespace ssmtkrd
