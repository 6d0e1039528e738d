#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace holo {

// Seeded random stream. The engine (mt19937_64) has a standardized output
// sequence; the double/normal mappings below are hand-rolled so that streams
// are reproducible across platforms and standard library implementations
// (std::uniform_real_distribution makes no such guarantee).
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) via Lemire's multiply-shift with rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        while (true) {
            uint64_t x = engine_();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            uint64_t lo = static_cast<uint64_t>(m);
            if (lo < n) {
                uint64_t t = (-n) % n;
                if (lo < t) continue;
            }
            return static_cast<uint64_t>(m >> 64);
        }
    }

    // Standard normal via Box-Muller (one value per call, no caching, so the
    // stream position is insensitive to call history).
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 engine_;
};

// Derives an independent per-operation seed from (seed, tag) so RNG use in
// one stage cannot perturb another. FNV-1a over the tag, mixed with the seed
// via splitmix64 finalization.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    uint64_t h = 1469598103934665603ull;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace holo
