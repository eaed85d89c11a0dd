#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace disac {

/// Deterministic, platform-independent PRNG (xoshiro256++ core) with its own
/// distribution transforms so that sequences do not depend on the standard
/// library implementation. Streams are derived from a master seed plus a
/// purpose tag and integer identifiers, so parallel Monte-Carlo runs and
/// per-BS measurement synthesis consume disjoint, reproducible streams.
class RngStream {
public:
    explicit RngStream(uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro state
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller (no state caching).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    /// Poisson via Knuth's product method; adequate for the small rates used here.
    int poisson(double rate) {
        if (rate <= 0.0) return 0;
        const double limit = std::exp(-rate);
        int n = 0;
        double prod = uniform();
        while (prod > limit) {
            ++n;
            prod *= uniform();
        }
        return n;
    }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    static uint64_t splitmix64(uint64_t& s) {
        uint64_t z = (s += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
};

/// Derive a child seed from (master, tag, a, b). Used as
/// derive_seed(seed, "truth", mc, 0) or derive_seed(seed, "meas", bs_id, mc).
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a, uint64_t b) {
    uint64_t h = master ^ 0xD6E8FEB86659FD93ull;
    for (char c : tag) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001B3ull;
    }
    uint64_t s = h;
    h = RngStream::splitmix64(s) ^ a;
    h = RngStream::splitmix64(h) ^ (b * 0x9E3779B97F4A7C15ull);
    uint64_t s2 = h;
    return RngStream::splitmix64(s2);
}

}  // namespace disac
