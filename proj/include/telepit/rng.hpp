#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace telepit {

/// Deterministic stream-splittable pseudorandom generator.
///
/// The output sequence is SplitMix64 (Steele, Lea & Flood 2014) evaluated at
/// key + i*GOLDEN for draw index i, so identical (seed, stream path, draw
/// sequence) yields bit-identical values on every platform with IEEE-754
/// doubles. Child streams are derived by mixing the parent key with an
/// FNV-1a hash of the stream name; sibling streams never share state.
///
/// Instances are cheap value types. An Rng must not be shared across
/// concurrent callers; give each task its own stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x1905ull)) {}

    /// Independent named substream (e.g. rng.stream("weights")).
    Rng stream(std::string_view name) const {
        Rng child(*this);
        child.key_ = mix(key_ ^ fnv1a(name));
        child.counter_ = 0;
        child.has_spare_ = false;
        return child;
    }

    /// Independent indexed substream (e.g. one per sample).
    Rng stream(std::uint64_t index) const {
        Rng child(*this);
        child.key_ = mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ull));
        child.counter_ = 0;
        child.has_spare_ = false;
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

    /// Standard normal via Box-Muller; the spare value is cached so draw
    /// counts stay predictable.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        // Guard the log singularity at u1 == 0.
        while (u1 <= 0.0) u1 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * next_normal(); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace telepit
