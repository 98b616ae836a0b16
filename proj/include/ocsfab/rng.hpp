#pragma once

#include <cstdint>
#include <limits>

namespace ocsfab {

// Streams are built on splitmix64 and hand-written transforms so that every
// sampled value is bit-identical across standard libraries and platforms.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Derives an independent stream key from a seed and up to three coordinates.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
    std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ull);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ (b + 0x3C6EF372FE94F82Bull));
    h = splitmix64(h ^ (c + 0xA54FF53A5F1D36F1ull));
    return h;
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) noexcept { return uniform() < p; }
    // Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;
    double normal(double mean, double sigma) noexcept;

private:
    std::uint64_t state_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ocsfab
