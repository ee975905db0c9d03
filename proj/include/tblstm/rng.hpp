#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace tblstm {

// PCG32 (Melissa O'Neill's minimal variant). Chosen over std engines because
// the state is two u64 words that serialize exactly and behave identically on
// every platform, which the checkpoint resume contract depends on.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}

    explicit Pcg32(uint64_t seed, uint64_t stream = 1) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    int64_t next_below(int64_t n) {
        return static_cast<int64_t>(next_double() * static_cast<double>(n));
    }

    // Standard normal via Box-Muller. Stateless between calls (the second
    // value is discarded) so the generator state is exactly {state, inc}.
    double normal() {
        double u1 = 1.0 - next_double();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Zero-mean normal with the tails beyond clip_sigmas rejected.
    double truncated_normal(double stddev, double clip_sigmas = 2.0) {
        double z;
        do {
            z = normal();
        } while (std::abs(z) > clip_sigmas);
        return z * stddev;
    }

    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }

    void restore(uint64_t state, uint64_t inc) {
        state_ = state;
        inc_ = inc;
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

// FNV-1a over the tag, mixed with the base seed through splitmix64. Used to
// give every parameter tensor and every rng stream its own reproducible seed.
inline uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    uint64_t z = base ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace tblstm
