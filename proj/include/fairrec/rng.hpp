#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fairrec {

// Deterministic PRNG with explicitly specified algorithms. The standard
// library distributions are implementation-defined, which would break the
// byte-identical-rerun guarantee if the toolchain ever changes, so sampling
// is spelled out here: splitmix64 core, 53-bit uniforms, Box-Muller normals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1], safe as a log argument.
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n), rejection-sampled so it is unbiased.
    std::uint64_t bounded(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller; uses one output per pair of uniforms
    /// so the stream layout stays trivial to reason about.
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Derives an independent substream, e.g. one per user, so generation can be
/// parallelized without changing results relative to the serial order.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t key) {
    Rng mix(seed ^ (key * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
    return mix.next_u64();
}

}  // namespace fairrec
