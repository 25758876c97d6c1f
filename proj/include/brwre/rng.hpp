// rng.hpp
//
// SplitMix64 stream and the variate generators built on it.
//
// SplitMix64 is a counter-based generator: the k-th output is a fixed 64-bit
// finalizer applied to seed + k * 0x9E3779B97F4A7C15. Every variate below is
// defined in terms of that stream only, so draws are reproducible across
// compilers and standard libraries (no std:: distributions are used).

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace brwre {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child seed for stream `index` under `master`; independent of call order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master ^ mix64(index * kGoldenGamma + 0x632BE59BD9B4E019ULL));
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        state_ += kGoldenGamma;
        return mix64(state_);
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by Box-Muller; consumes exactly two uniforms.
    double normal() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Exp(1); consumes one uniform.
    double exponential() noexcept { return -std::log(uniform()); }

private:
    std::uint64_t state_;
};

}  // namespace brwre
