#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// variant; both consume per-item counter-derived random streams, so their
// outputs are identical regardless of thread count.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ocsfab/ocs_device.hpp"

namespace ocsfab::kernels {

struct CalibrationParams {
    int radix = 0;
    std::uint64_t seed = 0;
    double il_mean_db = 0.0;
    double il_sigma_db = 0.0;
    double il_min_db = 0.0;
    double il_max_db = 0.0;
    std::span<const int> in_mirrors;
    std::span<const int> out_mirrors;
};

void fill_calibration_serial(const CalibrationParams& params, std::span<CalibrationEntry> out);
void fill_calibration_parallel(const CalibrationParams& params, std::span<CalibrationEntry> out);

// One interference trial per sample: every eye rail sees an independent uniform
// interferer phase, and the worst eye's closure is converted to a power penalty.
// `levels` is 2 for NRZ and 4 for PAM4. A closed eye yields +inf.
void eye_penalty_samples_serial(double epsilon, int levels, std::uint64_t seed,
                                std::span<double> out);
void eye_penalty_samples_parallel(double epsilon, int levels, std::uint64_t seed,
                                  std::span<double> out);

// Value at the requested quantile (nearest rank); reorders `samples`.
double quantile_in_place(std::span<double> samples, double q);

int max_threads();

}  // namespace ocsfab::kernels
