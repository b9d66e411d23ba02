#pragma once

#include <cstdint>
#include <random>

namespace dmnet {

// splitmix64: used to derive independent stream seeds from (seed, counters)
// so parallel or per-episode generators never share state.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) {
    return splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc908ULL) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + counter));
}

// Thin wrapper over mt19937_64 with explicit, distribution-free draws.
// std::uniform_*_distribution output is implementation-defined; these are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    int next_int(int lo, int hi) {  // inclusive range [lo, hi]
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double next_unit() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller (deterministic across platforms).
    double next_normal() {
        double u1 = next_unit();
        while (u1 <= 1e-300) u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dmnet
