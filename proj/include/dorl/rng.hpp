#pragma once

#include <cmath>
#include <cstdint>

namespace dorl {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based substream derivation: maps (base seed, stream tag, index)
/// to a well-mixed 64-bit seed. Same inputs always give the same output, so
/// per-trial and per-machine streams are reproducible regardless of the
/// order in which they are created.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t s = base;
    s ^= splitmix64(stream) + 0x9E3779B97F4A7C15ULL * (index + 1);
    std::uint64_t t = s;
    std::uint64_t out = splitmix64(t);
    out ^= splitmix64(t);
    return out;
}

// Stream tags; distinct per use so that e.g. trial 3 and machine 3 never
// collide on the same generator state.
inline constexpr std::uint64_t kStreamTrial = 0x7472696131ULL;
inline constexpr std::uint64_t kStreamMachine = 0x6d616368ULL;
inline constexpr std::uint64_t kStreamOracle = 0x6f7261636cULL;
inline constexpr std::uint64_t kStreamSigns = 0x7369676e73ULL;

/// xoshiro256++ generator. Small state, fast, and its output sequence is
/// fully pinned by this implementation (unlike <random> distributions,
/// which vary across standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire-style rejection keeps the draw unbiased.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t thresh = (0 - n) % n;
            while (lo < thresh) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Zero-mean truncated Gaussian on [-bound, bound], unit scale sigma.
    double truncated_gaussian(double sigma, double bound);

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline double Rng::truncated_gaussian(double sigma, double bound) {
    // Box-Muller with rejection outside the truncation interval.
    for (;;) {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) continue;
        double r = sigma * std::sqrt(-2.0 * std::log(u1));
        double z = r * std::cos(6.283185307179586476925286766559 * u2);
        if (z >= -bound && z <= bound) return z;
    }
}

}  // namespace dorl
