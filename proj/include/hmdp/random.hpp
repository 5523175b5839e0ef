#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hmdp {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the named stream derived from a master seed (FNV-1a over the name).
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(master ^ splitmix64(h));
}

/// Seed of the index-th substream, e.g. one per Monte Carlo trajectory.
inline std::uint64_t substream_seed(std::uint64_t stream, std::uint64_t index) {
    return splitmix64(stream ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/**
 * Thin wrapper over mt19937_64 with a platform-independent mapping to
 * doubles, so sampled trajectories are identical across standard libraries.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the mapping exact and portable
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace hmdp
