#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ivanet {

/// SplitMix64 generator. Every random stream in the project derives from
/// this so results are reproducible across platforms and standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Multiply-shift range reduction; bias is negligible for small spans.
        const auto r = static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * span) >> 64);
        return lo + static_cast<std::int64_t>(r);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Independent child stream, e.g. one per data-loading epoch.
    SplitMix64 fork() { return SplitMix64(next()); }

private:
    std::uint64_t state_;
};

}  // namespace ivanet
