#pragma once

#include <cmath>
#include <cstdint>

#include "kamlab/common.hpp"

namespace kamlab {

// Counter-based deterministic RNG. Each (seed, stream) pair yields an
// independent sequence, so Monte Carlo samples can be generated in any order
// (or concurrently) and still reproduce bit-identically.
struct CounterRng {
    std::uint64_t state;

    CounterRng(std::uint64_t seed, std::uint64_t stream) {
        state = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        // burn two outputs to decorrelate nearby streams
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform on (0,1), 53-bit resolution, never exactly 0
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Box-Muller; spare value cached for the next call
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// FNV-1a over raw bytes; used for config hashes and output integrity checks.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace kamlab
