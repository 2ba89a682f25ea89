#ifndef CTRAK_RNG_HPP
#define CTRAK_RNG_HPP

#include <cmath>
#include <cstdint>

#include "ctrak/common.hpp"

namespace ctrak {

// splitmix64 finalizer. Bijective on u64; used both as a stream generator and
// as a counter-based hash so that any element of a virtual random matrix can
// be regenerated from (seed, counter) alone.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless hash of a (seed, counter) pair.
inline std::uint64_t hash_u64(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ splitmix64(counter * 0xda942042e4dd58b5ULL + 1));
}

// Derive an independent named substream seed. Used to give every consumer of
// randomness (data jitter, training batches, noise draws, ...) its own stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return hash_u64(seed, stream ^ 0x5851f42d4c957f2dULL);
}

// Deterministic sequential generator. The normal() draw is a plain Box-Muller
// pair so the stream is reproducible independent of any library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    void fill_normal(Vec& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
    }

    Vec normal_vec(Eigen::Index n) {
        Vec v(n);
        fill_normal(v);
        return v;
    }

private:
    std::uint64_t state_;
};

}  // namespace ctrak

#endif
