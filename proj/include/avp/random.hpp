#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace avp {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Folds an ordered key tuple into one 64-bit stream key.
inline std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

// Counter-based generator: the i-th draw of a stream depends only on (key, i),
// so streams keyed by sample or region index are independent of call order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}
    CounterRng(std::initializer_list<std::uint64_t> parts) noexcept : key_(stream_key(parts)) {}

    std::uint64_t next_u64() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        // Rejection keeps the draw exactly uniform.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Box-Muller; one normal per call, the partner value is discarded.
    double normal(double mean = 0.0, double stddev = 1.0) noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Standard Gumbel draw -log(-log U) with U clamped to [1e-12, 1 - 1e-12].
inline double gumbel_from_uniform(double u) noexcept {
    constexpr double lo = 1e-12;
    constexpr double hi = 1.0 - 1e-12;
    u = u < lo ? lo : (u > hi ? hi : u);
    return -std::log(-std::log(u));
}

}  // namespace avp
