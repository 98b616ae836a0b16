#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ocsfab/expansion.hpp"
#include "ocsfab/fabric.hpp"
#include "ocsfab/ocs_device.hpp"
#include "ocsfab/optical_link.hpp"
#include "ocsfab/rng.hpp"
#include "ocsfab/scenario.hpp"
#include "ocsfab/topo_engineering.hpp"

namespace {

using namespace ocsfab;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double time_limit_s;
    std::function<Outcome()> run;
};

std::vector<int> random_permutation(Rng& rng, int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 1);
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    return p;
}

OcsDevice manufactured(const DeviceProfile& profile, std::uint64_t seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        try {
            return OcsDevice::manufacture(profile, derive_seed(seed, attempt));
        } catch (const ManufacturingFailure&) {
            if (attempt > 64) throw;
        }
    }
}

Outcome calibration_bounds() {
    DeviceProfile profile;
    profile.mirror_yield = 0.95;
    const int expected = profile.radix * profile.radix;
    bool sizes_ok = true;
    double il_max = 0.0;
    double rl_max = -1e9;
    double power_max = 0.0;
    std::vector<double> rl;
    for (int i = 0; i < 100; ++i) {
        auto dev = manufactured(profile, derive_seed(100, static_cast<std::uint64_t>(i)));
        auto table = calibrate(dev, derive_seed(101, static_cast<std::uint64_t>(i)));
        sizes_ok = sizes_ok && static_cast<int>(table.size()) == expected;
        il_max = std::max(il_max, table.max_insertion_loss_db());
        rl_max = std::max(rl_max, table.max_return_loss_db());
        rl.insert(rl.end(), table.return_loss_in().begin(), table.return_loss_in().end());
        rl.insert(rl.end(), table.return_loss_out().begin(), table.return_loss_out().end());
        dev.install_calibration(std::move(table));
        std::vector<int> full(static_cast<std::size_t>(profile.radix));
        std::iota(full.begin(), full.end(), 1);
        dev.apply_permutation(full);
        power_max = std::max(power_max, dev.power_draw_w());
    }
    std::nth_element(rl.begin(), rl.begin() + static_cast<std::ptrdiff_t>(rl.size() / 2), rl.end());
    const double median = rl[rl.size() / 2];
    const bool pass = sizes_ok && il_max <= 2.0 && rl_max <= -38.0 && std::abs(median + 46.0) <= 1.0 &&
                      power_max <= 108.0;
    return {pass, fmt::format("{} entries per device: {}; IL max {:.3f} dB; RL max {:.2f} dB; RL median {:.2f} dB; "
                              "full-load power {:.2f} W",
                              expected, sizes_ok ? "yes" : "no", il_max, rl_max, median, power_max)};
}

Outcome permutations() {
    auto dev = manufactured(DeviceProfile{}, 7);
    dev.install_calibration(calibrate(dev, 8));
    Rng rng(2026);
    int bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto perm = random_permutation(rng, dev.radix());
        dev.apply_permutation(perm);
        if (dev.connection_count() != dev.radix()) ++bad;
        for (int in = 1; in <= dev.radix(); ++in) {
            const int out = perm[static_cast<std::size_t>(in) - 1];
            if (dev.output_for(in) != out || dev.input_for(out) != in) {
                ++bad;
                break;
            }
        }
    }
    return {bad == 0, fmt::format("1000 permutations of {} ports, {} mismatches", dev.radix(), bad)};
}

FabricConfig fabric_4x32(LinkMode mode) {
    FabricConfig c;
    c.n_abs = 4;
    c.uplinks_per_ab = 32;
    c.ocs_count = 16;
    c.mode = mode;
    c.seed = 2026;
    return c;
}

Outcome circulator_halving() {
    const auto c = Fabric::build(fabric_4x32(LinkMode::Circulator)).realization_report();
    const auto d = Fabric::build(fabric_4x32(LinkMode::DuplexPair)).realization_report();
    const bool pass = c.links == d.links && 2 * c.ocs_ports_used == d.ocs_ports_used && 2 * c.fibers_used == d.fibers_used;
    return {pass, fmt::format("{} links: circulator {} ports / {} fibers, duplex {} ports / {} fibers", c.links,
                              c.ocs_ports_used, c.fibers_used, d.ocs_ports_used, d.fibers_used)};
}

Outcome delay() {
    auto g = default_generation_table().at("400G-CWDM4");
    g.latency_ns = 0.0;
    const auto path = build_link_path({g, g, LinkOptics{}, 100.0, 100.0, std::nullopt});
    const double ns = propagation_delay_ns(path);
    return {std::abs(ns - 1000.0) <= 1e-9, fmt::format("200 m fiber -> {:.6f} ns", ns)};
}

Outcome mpi_agreement() {
    bool pass = true;
    std::string detail;
    for (double eps : {1e-6, 1e-5, 1e-4, 1e-3}) {
        const double nrz_mc = mpi_oracle(eps, Modulation::Nrz, 1'000'000, 42).penalty_p999_db;
        const double pam_mc = mpi_oracle(eps, Modulation::Pam4, 1'000'000, 43).penalty_p999_db;
        const double nrz_cf = mpi_penalty_db(eps, Modulation::Nrz);
        const double pam_cf = mpi_penalty_db(eps, Modulation::Pam4);
        const double worst = std::max(std::abs(nrz_mc - nrz_cf), std::abs(pam_mc - pam_cf));
        pass = pass && worst <= 0.5 && pam_mc > nrz_mc && pam_cf > nrz_cf;
        detail += fmt::format("{}eps {:.0e}: NRZ {:.4f}/{:.4f}, PAM4 {:.4f}/{:.4f} dB", detail.empty() ? "" : "; ", eps,
                              nrz_mc, nrz_cf, pam_mc, pam_cf);
    }
    return {pass, detail};
}

Outcome interop() {
    const auto table = default_generation_table();
    int pairs = 0;
    bool pass = table.validate().empty();
    for (const auto& a : table.all()) {
        for (const auto& b : table.all()) {
            const auto n = negotiate_interop(a, b);
            const auto& lower = a.native_rate() <= b.native_rate() ? a : b;
            pass = pass && n.compatible && n.rate_gbps == std::min(a.native_rate(), b.native_rate()) &&
                   n.modulation == lower.modulation && n == negotiate_interop(b, a);
            ++pairs;
        }
    }
    auto off_grid = table.at("100G-CWDM4");
    off_grid.grid_nm = {1295.0, 1300.0, 1305.0, 1310.0};
    pass = pass && !negotiate_interop(table.at("400G-CWDM4"), off_grid).compatible;
    return {pass, fmt::format("{} ordered pairs negotiate the lower native rate; grid mismatch rejected", pairs)};
}

RateMatrix negotiated_rates(const std::vector<std::string>& gens) {
    const auto table = default_generation_table();
    const auto n = gens.size();
    RateMatrix r(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a != b) r[a][b] = negotiate_interop(table.at(gens[a]), table.at(gens[b])).rate_gbps;
        }
    }
    return r;
}

Outcome topology() {
    const std::vector<std::string> names{"100G-CWDM4", "200G-CWDM4", "400G-CWDM4"};
    int within = 0;
    int dominated = 0;
    int instances = 0;
    double worst_ratio = 1.0;
    for (std::uint64_t seed = 0; instances < 100; ++seed) {
        Rng rng(derive_seed(7007, seed));
        const int n = 2 + static_cast<int>(rng.below(3));
        const int max_u = 2 * kOracleMaxLinks / n;
        const int u = (n - 1) + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_u - (n - 1) + 1)));
        std::vector<std::string> gens;
        for (int a = 0; a < n; ++a) gens.push_back(names[rng.below(names.size())]);
        const auto rates = negotiated_rates(gens);
        DemandMatrix d(n);
        for (int s = 0; s < n; ++s) {
            for (int t = 0; t < n; ++t) {
                if (s != t) d.set(s, t, rng.uniform(0.0, 4000.0));
            }
        }
        const auto canon = canonical_striping(n, u);
        if (canon.total_links() > kOracleMaxLinks) continue;
        ++instances;
        const double heuristic = evaluate_throughput(canon, rates, d, RoutingPolicy::Wcmp).alpha;
        const double exact = throughput_oracle(canon, rates, d);
        const double ratio = exact > 0.0 ? heuristic / exact : 1.0;
        worst_ratio = std::min(worst_ratio, ratio);
        if (ratio >= 0.95 && heuristic <= exact * (1.0 + 1e-9)) ++within;
        const auto opt = optimize_striping(d, n, u, RoutingPolicy::Wcmp, rates);
        if (evaluate_throughput(opt, rates, d, RoutingPolicy::Wcmp).alpha >= heuristic * (1.0 - 1e-9)) ++dominated;
    }

    const int n = 4;
    const int u = 32;
    const auto rates = uniform_rates(n, 400.0);
    DemandMatrix elephant(n);
    for (int s = 0; s < n; ++s) {
        for (int t = 0; t < n; ++t) {
            if (s != t) elephant.set(s, t, 300.0);
        }
    }
    elephant.set(0, 1, 9000.0);
    elephant.set(1, 0, 9000.0);
    const auto canon = canonical_striping(n, u);
    const double target = evaluate_throughput(canon, rates, elephant, RoutingPolicy::Wcmp).alpha;
    const auto lean = minimize_links(optimize_striping(elephant, n, u, RoutingPolicy::Wcmp, rates), rates, elephant,
                                     RoutingPolicy::Wcmp, target);
    const bool fewer = lean.total_links() < canon.total_links() &&
                       evaluate_throughput(lean, rates, elephant, RoutingPolicy::Wcmp).alpha >= target * (1.0 - 1e-9);
    const bool pass = within == instances && dominated == instances && fewer;
    return {pass, fmt::format("heuristic within 5% of exact on {}/{} (worst ratio {:.4f}); optimized >= canonical "
                              "on {}/{}; elephant needs {} links vs {} canonical at alpha {:.4f}",
                              within, instances, worst_ratio, dominated, instances, lean.total_links(),
                              canon.total_links(), target)};
}

Outcome expansion() {
    const Fabric base = Fabric::build(fabric_4x32(LinkMode::Circulator));
    const std::vector<NewAbSpec> specs(4, NewAbSpec{"400G-CWDM4", 0});
    const auto plan = plan_expansion(base, specs, 0.125);
    int held = 0;
    int finished = 0;
    double min_released = plan.source_capacity_gbps;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Fabric f = base;
        ExecuteOptions o;
        o.flake_probability = 0.2;
        const auto log = execute_plan(f, plan, seed, o);
        for (const auto& e : log.events) min_released = std::min(min_released, e.released_gbps);
        if (log.floor_violations().empty() && check_monotone(log).empty()) ++held;
        if (!log.halted && !log.events.empty() && log.events.back().to != LinkState::Pending) ++finished;
    }
    Fabric clean = base;
    const auto log = execute_plan(clean, plan, 1);
    const bool exact = clean.striping() == canonical_striping(8, 32) && log.failed_links.empty();
    const bool pass = held == 50 && finished == 50 && exact;
    return {pass, fmt::format("floor {} Gb/s held in {}/50 runs (min released {} Gb/s), {}/50 terminated; "
                              "flake 0 reaches canonical(8): {}",
                              plan.capacity_floor_gbps(), held, min_released, finished, exact ? "yes" : "no")};
}

Outcome failures() {
    const auto f = Fabric::build(fabric_4x32(LinkMode::Circulator));
    bool pass = true;
    std::string detail;
    for (int z = 0; z < f.config().layout.zones; ++z) {
        const auto zone = f.failure_impact(FailureTarget::of_zone(z));
        const double quarter = zone.links_total / 4.0;
        pass = pass && std::abs(zone.links_lost - quarter) <= 1.0;
        for (char feed : {'A', 'B'}) pass = pass && f.failure_impact(FailureTarget::of_feed(z, feed)).links_lost == 0;
        detail += fmt::format("{}zone {} loses {}/{}", detail.empty() ? "" : ", ", z, zone.links_lost, zone.links_total);
    }
    return {pass, detail + "; single feed loses 0"};
}

Outcome reproducible() {
    const auto parsed = parse_config_file(std::string(OCSFAB_SCENARIO_DIR) + "/acceptance.json");
    if (!parsed.ok()) return {false, "acceptance.json does not parse: " + parsed.violations.front()};
    const auto a = emit_report(run_scenario(*parsed.config), ReportFormat::Json);
    const auto b = emit_report(run_scenario(*parsed.config), ReportFormat::Json);
    const auto report = RunReport::from_json(Json::parse(a));
    return {a == b && !report.aborted,
            fmt::format("{} bytes, identical: {}, aborted: {}", a.size(), a == b ? "yes" : "no", report.aborted)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "calibration bounds for 100 devices at 0.95 yield", 30.0, calibration_bounds},
        {2, "1000 random permutations", 10.0, permutations},
        {3, "circulators halve ports and fibers", 0.0, circulator_halving},
        {4, "propagation delay", 0.0, delay},
        {5, "Monte Carlo MPI within 0.5 dB of closed form", 0.0, mpi_agreement},
        {6, "interop matrix", 0.0, interop},
        {7, "throughput heuristic, optimizer and link savings", 120.0, topology},
        {8, "4 -> 8 expansion under flaky qualification", 60.0, expansion},
        {9, "zone and power feed failures", 0.0, failures},
        {10, "byte-identical scenario reports", 0.0, reproducible},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        const bool in_time = c.time_limit_s <= 0.0 || secs <= c.time_limit_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        const std::string limit = c.time_limit_s > 0.0 ? fmt::format(", limit {:.0f} s", c.time_limit_s) : "";
        std::printf("%s criterion %d: %s (%s; %.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs, limit.c_str());
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
