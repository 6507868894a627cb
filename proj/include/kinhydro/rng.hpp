#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace kinhydro {

/// Counter-based generator: every draw is a hash of (seed, stream key, counter),
/// so results do not depend on the order in which streams are consumed.
class CounterRng {
public:
    /// Stream keyed by up to four 64-bit words, e.g. (member, step, site, slot).
    CounterRng(std::uint64_t seed, std::uint64_t k0, std::uint64_t k1 = 0, std::uint64_t k2 = 0,
               std::uint64_t k3 = 0)
        : key_(mix(mix(mix(mix(mix(seed) ^ k0) ^ k1) ^ k2) ^ k3)) {}

    std::uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = next_u64();
        __uint128_t mprod = static_cast<__uint128_t>(x) * n;
        auto low = static_cast<std::uint64_t>(mprod);
        if (low < n) {
            const std::uint64_t t = -n % n;
            while (low < t) {
                x = next_u64();
                mprod = static_cast<__uint128_t>(x) * n;
                low = static_cast<std::uint64_t>(mprod);
            }
        }
        return static_cast<std::uint64_t>(mprod >> 64);
    }

    /// SplitMix64 finalizer.
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace kinhydro
