#pragma once

#include <cstdint>
#include <stdexcept>

namespace fruitnet {

// Deterministic counter-based generator (SplitMix64, Steele et al. 2014).
// Same seed gives the same stream on every platform; the whole training
// pipeline derives its randomness from this type, never from std::random.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo,hi). Guards against hitting hi through rounding.
    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("Prng::uniform: lo must be < hi");
        double v = lo + (hi - lo) * next_double();
        if (v >= hi) v = lo;
        return v;
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0,n) via Lemire's multiply-shift reduction.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Independent child stream seeded from this one.
    Prng split() { return Prng(next_u64()); }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

// SplitMix64 finalizer, used to derive per-(epoch, purpose) stream seeds so
// resumed runs replay the exact shuffle/dropout sequences without carrying
// generator state across epochs.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class Stream : std::uint64_t { shuffle = 1, dropout = 2, init = 3, synth = 4 };

inline Prng derive_stream(std::uint64_t seed, std::uint64_t epoch, Stream purpose) {
    std::uint64_t s = mix64(seed ^ mix64(epoch * 0xA24BAED4963EE407ULL +
                                         static_cast<std::uint64_t>(purpose)));
    return Prng(s);
}

}  // namespace fruitnet
