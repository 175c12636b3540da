#pragma once

#include <cmath>
#include <cstdint>

namespace camsync {

/// Deterministic, platform-independent PRNG (splitmix64). Every randomized
/// component of the toolkit draws from this generator so that identical seeds
/// give identical outputs everywhere. The Gaussian transform is the polar
/// Box-Muller method with the spare deviate discarded; the draw sequence is
/// therefore a pure function of the seed and the call sequence.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Standard normal deviate (polar method, spare discarded).
    double next_gaussian() {
        for (;;) {
            const double u = 2.0 * next_unit() - 1.0;
            const double v = 2.0 * next_unit() - 1.0;
            const double s = u * u + v * v;
            if (s >= 1.0 || s == 0.0)
                continue;
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

private:
    std::uint64_t state_;
};

/// Independent substream k of a base seed. One scramble step keeps nearby
/// seeds/streams decorrelated.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t k) {
    SplitMix64 mix(seed ^ (0xA0761D6478BD642FULL + k * 0xE7037ED1A0B428DBULL));
    return mix.next_u64();
}

} // namespace camsync
