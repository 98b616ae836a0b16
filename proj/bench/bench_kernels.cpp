#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "ocsfab/kernels.hpp"
#include "ocsfab/rng.hpp"
#include "ocsfab/topo_engineering.hpp"

namespace {

using namespace ocsfab;

struct CalibrationFixture {
    std::vector<int> mirrors = [] {
        std::vector<int> m(136);
        std::iota(m.begin(), m.end(), 0);
        return m;
    }();
    std::vector<CalibrationEntry> out = std::vector<CalibrationEntry>(136 * 136);
    kernels::CalibrationParams params{136, 7, 1.4, 0.2, 0.5, 2.0, mirrors, mirrors};
};

void BM_CalibrationSerial(benchmark::State& state) {
    CalibrationFixture f;
    for (auto _ : state) {
        kernels::fill_calibration_serial(f.params, f.out);
        benchmark::DoNotOptimize(f.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.out.size()));
}

void BM_CalibrationParallel(benchmark::State& state) {
    CalibrationFixture f;
    for (auto _ : state) {
        kernels::fill_calibration_parallel(f.params, f.out);
        benchmark::DoNotOptimize(f.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.out.size()));
}

void BM_EyePenaltySerial(benchmark::State& state) {
    std::vector<double> out(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        kernels::eye_penalty_samples_serial(1e-4, 4, 11, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EyePenaltyParallel(benchmark::State& state) {
    std::vector<double> out(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        kernels::eye_penalty_samples_parallel(1e-4, 4, 11, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<ThroughputCase> throughput_cases(int count) {
    std::vector<ThroughputCase> cases;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(99, static_cast<std::uint64_t>(i)));
        const int n = 6;
        DemandMatrix d(n);
        for (int s = 0; s < n; ++s) {
            for (int t = 0; t < n; ++t) {
                if (s != t) d.set(s, t, rng.uniform(0.0, 1000.0));
            }
        }
        cases.push_back({canonical_striping(n, 30), uniform_rates(n, 400.0), d, RoutingPolicy::Wcmp});
    }
    return cases;
}

void BM_ThroughputBatchSerial(benchmark::State& state) {
    const auto cases = throughput_cases(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_throughput_batch_serial(cases));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ThroughputBatchParallel(benchmark::State& state) {
    const auto cases = throughput_cases(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_throughput_batch_parallel(cases));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_CalibrationSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CalibrationParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EyePenaltySerial)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EyePenaltyParallel)->Arg(1 << 20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThroughputBatchSerial)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ThroughputBatchParallel)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
