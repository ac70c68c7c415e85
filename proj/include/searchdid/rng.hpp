#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace searchdid {

// One named seedable generator. Parallel work derives independent streams
// by counter-based splitting (SplitMix64 mixing of seed and stream id), so
// results do not depend on scheduling order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(mix(seed) + kGamma)) {}

    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(mix(seed) ^ mix(stream_id * kGamma + 1));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Inverse-cdf exponential; rate 0 is treated as "never fires".
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform01()) / rate;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t kGamma = 0x632BE59BD9B4E019ull;
    std::mt19937_64 engine_;
};

}  // namespace searchdid
