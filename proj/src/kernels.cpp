#include "ocsfab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ocsfab/rng.hpp"

#ifdef OCSFAB_HAVE_OPENMP
#include <omp.h>
#endif

namespace ocsfab::kernels {
namespace {

constexpr int kGridColumns = 16;
constexpr double kMirrorPitchMm = 1.0;
constexpr double kDieSeparationMm = 50.0;
constexpr double kMaxTiltRad = 0.175;
constexpr double kMaxDriveV = 200.0;
constexpr double kServoResidualV = 0.5;

// Electrostatic comb drives: tilt grows roughly with the square of voltage.
float drive_voltage(double tilt_rad) {
    const double magnitude = kMaxDriveV * std::sqrt(std::min(1.0, std::abs(tilt_rad) / kMaxTiltRad));
    return static_cast<float>(std::copysign(magnitude, tilt_rad));
}

CalibrationEntry calibrate_one(const CalibrationParams& p, int in_idx, int out_idx) {
    Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(in_idx), static_cast<std::uint64_t>(out_idx)));
    const int mi = p.in_mirrors[in_idx];
    const int mo = p.out_mirrors[out_idx];
    const double dx = (mo % kGridColumns - mi % kGridColumns) * kMirrorPitchMm;
    const double dy = (mo / kGridColumns - mi / kGridColumns) * kMirrorPitchMm;
    const double tx = 0.5 * std::atan2(dx, kDieSeparationMm);
    const double ty = 0.5 * std::atan2(dy, kDieSeparationMm);

    CalibrationEntry e;
    e.voltages = {drive_voltage(tx), drive_voltage(ty), drive_voltage(-tx), drive_voltage(-ty)};
    for (auto& v : e.voltages) v += static_cast<float>(rng.normal(0.0, kServoResidualV));
    const double il = rng.normal(p.il_mean_db, p.il_sigma_db);
    e.insertion_loss_db = std::clamp(il, p.il_min_db, p.il_max_db);
    return e;
}

void check_calibration_args(const CalibrationParams& p, std::span<CalibrationEntry> out) {
    const auto n = static_cast<std::size_t>(p.radix);
    if (p.in_mirrors.size() != n || p.out_mirrors.size() != n || out.size() != n * n) {
        throw std::invalid_argument("calibration kernel: inconsistent sizes");
    }
}

double eye_trial(double sqrt_eps, int levels, std::uint64_t seed, std::uint64_t sample) {
    const double spacing = 1.0 / (levels - 1);
    double worst = std::numeric_limits<double>::infinity();
    double previous = 0.0;
    for (int k = 0; k < levels; ++k) {
        const std::uint64_t bits = splitmix64(derive_seed(seed, sample, static_cast<std::uint64_t>(k)));
        const double phase = 2.0 * std::numbers::pi * (static_cast<double>(bits >> 11) * 0x1.0p-53);
        const double rail = sqrt_eps * std::cos(phase);
        if (k > 0) worst = std::min(worst, spacing + rail - previous);
        previous = rail;
    }
    const double relative = worst / spacing;
    if (relative <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(relative);
}

void check_levels(int levels) {
    if (levels < 2) throw std::invalid_argument("eye kernel: need at least two levels");
}

}  // namespace

void fill_calibration_serial(const CalibrationParams& p, std::span<CalibrationEntry> out) {
    check_calibration_args(p, out);
    for (int i = 0; i < p.radix; ++i) {
        for (int j = 0; j < p.radix; ++j) {
            out[static_cast<std::size_t>(i) * p.radix + j] = calibrate_one(p, i, j);
        }
    }
}

void fill_calibration_parallel(const CalibrationParams& p, std::span<CalibrationEntry> out) {
    check_calibration_args(p, out);
    const long total = static_cast<long>(p.radix) * p.radix;
#pragma omp parallel for schedule(static)
    for (long idx = 0; idx < total; ++idx) {
        out[static_cast<std::size_t>(idx)] =
            calibrate_one(p, static_cast<int>(idx / p.radix), static_cast<int>(idx % p.radix));
    }
}

void eye_penalty_samples_serial(double epsilon, int levels, std::uint64_t seed, std::span<double> out) {
    check_levels(levels);
    const double s = std::sqrt(epsilon);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = eye_trial(s, levels, seed, i);
}

void eye_penalty_samples_parallel(double epsilon, int levels, std::uint64_t seed, std::span<double> out) {
    check_levels(levels);
    const double s = std::sqrt(epsilon);
    const long n = static_cast<long>(out.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = eye_trial(s, levels, seed, static_cast<std::uint64_t>(i));
    }
}

double quantile_in_place(std::span<double> samples, double q) {
    if (samples.empty()) throw std::invalid_argument("quantile of empty sample");
    const auto n = samples.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n) - 1;
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(rank), samples.end());
    return samples[rank];
}

int max_threads() {
#ifdef OCSFAB_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace ocsfab::kernels
