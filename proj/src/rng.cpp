#include "ocsfab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ocsfab {

std::uint64_t Rng::below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    // Rejection keeps the result exactly uniform.
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % n;
}

double Rng::normal(double mean, double sigma) noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return mean + sigma * spare_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sigma * r * std::cos(theta);
}

}  // namespace ocsfab
