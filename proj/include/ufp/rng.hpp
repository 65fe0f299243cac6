#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ufp {

// SplitMix64 finalizer. Every stochastic choice in the library (weight init,
// shuffles, synthetic data, fault masks, campaign seeds) goes through this one
// mixing function so that a run is reproducible from its seeds alone, on any
// platform, and so that other implementations can regenerate identical masks.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Folds an index into a seed to derive an independent stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ (index * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

// Counter-based SplitMix64 stream.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire multiply-shift; n == 0 is a caller bug.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Box-Muller; one value per call (the second draw is discarded to keep the
    // consumption pattern simple to document).
    double next_gaussian() {
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool next_bernoulli(double p) { return next_unit() < p; }

private:
    std::uint64_t state_;
};

} // namespace ufp
