#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ocsfab/kernels.hpp"

using namespace ocsfab;

namespace {

kernels::CalibrationParams params_for(const std::vector<int>& mirrors, std::uint64_t seed) {
    return {static_cast<int>(mirrors.size()), seed, 1.4, 0.2, 0.5, 2.0, mirrors, mirrors};
}

}  // namespace

TEST(Kernels, CalibrationParallelMatchesSerial) {
    std::vector<int> mirrors(136);
    std::iota(mirrors.begin(), mirrors.end(), 20);
    const auto p = params_for(mirrors, 17);
    std::vector<CalibrationEntry> a(136 * 136), b(136 * 136);
    kernels::fill_calibration_serial(p, a);
    kernels::fill_calibration_parallel(p, b);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_TRUE(a[i] == b[i]) << "entry " << i;
}

TEST(Kernels, CalibrationLossWithinClip) {
    std::vector<int> mirrors(136);
    std::iota(mirrors.begin(), mirrors.end(), 0);
    std::vector<CalibrationEntry> out(136 * 136);
    kernels::fill_calibration_serial(params_for(mirrors, 4), out);
    double sum = 0.0;
    for (const auto& e : out) {
        ASSERT_GE(e.insertion_loss_db, 0.5);
        ASSERT_LE(e.insertion_loss_db, 2.0);
        sum += e.insertion_loss_db;
        for (float v : e.voltages) ASSERT_LE(std::abs(v), 200.0f + 5.0f);
    }
    EXPECT_NEAR(sum / out.size(), 1.4, 0.02);
}

TEST(Kernels, EyePenaltyParallelMatchesSerial) {
    std::vector<double> a(50000), b(50000);
    kernels::eye_penalty_samples_serial(1e-4, 4, 3, a);
    kernels::eye_penalty_samples_parallel(1e-4, 4, 3, b);
    EXPECT_EQ(a, b);
}

TEST(Kernels, EyePenaltyZeroWithoutReflections) {
    std::vector<double> out(1000);
    kernels::eye_penalty_samples_serial(0.0, 2, 1, out);
    for (double v : out) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Kernels, EyePenaltyClosedEyeIsInfinite) {
    std::vector<double> out(1000);
    kernels::eye_penalty_samples_serial(0.5, 4, 1, out);
    EXPECT_TRUE(std::any_of(out.begin(), out.end(), [](double v) { return std::isinf(v); }));
}

TEST(Kernels, QuantileNearestRank) {
    std::vector<double> v(1000);
    std::iota(v.begin(), v.end(), 1.0);
    std::reverse(v.begin(), v.end());
    // Nearest rank: ceil(0.999 * 1000) = 999.
    EXPECT_DOUBLE_EQ(kernels::quantile_in_place(v, 0.999), 999.0);
    EXPECT_DOUBLE_EQ(kernels::quantile_in_place(v, 0.5), 500.0);
    EXPECT_DOUBLE_EQ(kernels::quantile_in_place(v, 1.0), 1000.0);
}
