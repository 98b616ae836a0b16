#include "ocsfab/optical_link.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "ocsfab/kernels.hpp"
#include "ocsfab/rng.hpp"

namespace ocsfab {

namespace {

constexpr double kFiberNsPerM = 5.0;
constexpr double kFreespaceNsPerM = 3.3;

double db_to_ratio(double db) { return std::pow(10.0, db / 10.0); }

bool contains(const PowerRange& outer, const PowerRange& inner) {
    return outer.min_dbm <= inner.min_dbm && outer.max_dbm >= inner.max_dbm;
}

}  // namespace

int modulation_levels(Modulation m) { return m == Modulation::Pam4 ? 4 : 2; }
int eye_multiplier(Modulation m) { return modulation_levels(m) - 1; }

std::string to_string(Modulation m) { return m == Modulation::Pam4 ? "PAM4" : "NRZ"; }

std::optional<Modulation> parse_modulation(const std::string& s) {
    std::string lower;
    for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "nrz") return Modulation::Nrz;
    if (lower == "pam4") return Modulation::Pam4;
    return std::nullopt;
}

int TransceiverGeneration::native_rate() const {
    return static_cast<int>(std::lround(per_lane_gbps * lanes));
}

bool TransceiverGeneration::supports(int rate) const {
    return std::find(supported_rates.begin(), supported_rates.end(), rate) != supported_rates.end();
}

PowerRange TransceiverGeneration::rx_window(int rate) const {
    return {rx_sensitivity_dbm.at(rate), rx_overload_dbm};
}

std::vector<std::string> TransceiverGeneration::validate() const {
    std::vector<std::string> problems;
    const auto err = [&](std::string msg) { problems.push_back(fmt::format("generation {}: {}", name, msg)); };
    if (name.empty()) err("name required");
    if (!(per_lane_gbps > 0.0)) err("per_lane_gbps must be positive");
    if (lanes < 1) err("lanes must be positive");
    if (grid_nm.size() != static_cast<std::size_t>(lanes)) err("grid must have one wavelength per lane");
    if (!supports(native_rate())) err(fmt::format("supported_rates must include native rate {}", native_rate()));
    for (int r : supported_rates) {
        if (!tx_power_dbm.contains(r)) err(fmt::format("tx_power_dbm missing rate {}", r));
        else if (tx_power_dbm.at(r).min_dbm > tx_power_dbm.at(r).max_dbm) err(fmt::format("tx range inverted at {}", r));
        if (!rx_sensitivity_dbm.contains(r)) err(fmt::format("rx_sensitivity_dbm missing rate {}", r));
        else if (rx_sensitivity_dbm.at(r) >= rx_overload_dbm) err(fmt::format("rx window empty at rate {}", r));
    }
    if (!(fec_ber_threshold > 0.0 && fec_ber_threshold < 0.5)) err("fec_ber_threshold must be in (0, 0.5)");
    if (!(latency_ns >= 0.0)) err("latency_ns must be non-negative");
    return problems;
}

GenerationTable::GenerationTable(std::vector<TransceiverGeneration> generations)
    : generations_(std::move(generations)) {}

const TransceiverGeneration* GenerationTable::find(const std::string& name) const {
    for (const auto& g : generations_) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

const TransceiverGeneration& GenerationTable::at(const std::string& name) const {
    if (const auto* g = find(name)) return *g;
    throw ConfigInvalid(fmt::format("unknown generation '{}'", name));
}

std::vector<std::string> GenerationTable::validate() const {
    std::vector<std::string> problems;
    std::set<std::string> names;
    for (const auto& g : generations_) {
        auto p = g.validate();
        problems.insert(problems.end(), p.begin(), p.end());
        if (!names.insert(g.name).second) problems.push_back(fmt::format("generation {} defined twice", g.name));
    }
    if (!problems.empty()) return problems;
    for (const auto& g : generations_) {
        if (g.grid_nm != generations_.front().grid_nm) {
            problems.push_back(fmt::format("generation {}: grid differs from {}", g.name, generations_.front().name));
        }
        for (const auto& older : generations_) {
            if (&older == &g || older.native_rate() >= g.native_rate() || !g.supports(older.native_rate())) continue;
            const int r = older.native_rate();
            if (!contains(g.rx_window(r), older.rx_window(r))) {
                problems.push_back(fmt::format("generation {}: rx window at {} G does not cover {}", g.name, r, older.name));
            }
        }
    }
    return problems;
}

GenerationTable default_generation_table() {
    TransceiverGeneration g40{
        .name = "40G-CWDM4",
        .per_lane_gbps = 10.0,
        .lanes = 4,
        .modulation = Modulation::Nrz,
        .grid_nm = kCwdm4GridNm,
        .tx_power_dbm = {{40, {-3.0, 2.3}}},
        .rx_sensitivity_dbm = {{40, -11.5}},
        .rx_overload_dbm = 2.3,
        .extinction_ratio_db = 4.0,
        .fec_ber_threshold = 1e-12,
        .supported_rates = {40},
        .latency_ns = 10.0,
    };
    TransceiverGeneration g100{
        .name = "100G-CWDM4",
        .per_lane_gbps = 25.0,
        .lanes = 4,
        .modulation = Modulation::Nrz,
        .grid_nm = kCwdm4GridNm,
        .tx_power_dbm = {{40, {-3.0, 2.5}}, {100, {-2.5, 2.5}}},
        .rx_sensitivity_dbm = {{40, -12.0}, {100, -10.5}},
        .rx_overload_dbm = 3.0,
        .extinction_ratio_db = 4.5,
        .fec_ber_threshold = 1e-12,
        .supported_rates = {40, 100},
        .latency_ns = 10.0,
    };
    TransceiverGeneration g200{
        .name = "200G-CWDM4",
        .per_lane_gbps = 50.0,
        .lanes = 4,
        .modulation = Modulation::Pam4,
        .grid_nm = kCwdm4GridNm,
        .tx_power_dbm = {{40, {-3.0, 3.0}}, {100, {-2.5, 3.0}}, {200, {-2.0, 3.5}}},
        .rx_sensitivity_dbm = {{40, -12.5}, {100, -11.0}, {200, -9.0}},
        .rx_overload_dbm = 4.0,
        .extinction_ratio_db = 5.0,
        .fec_ber_threshold = 2.4e-4,
        .supported_rates = {40, 100, 200},
        .latency_ns = 60.0,
    };
    TransceiverGeneration g400{
        .name = "400G-CWDM4",
        .per_lane_gbps = 100.0,
        .lanes = 4,
        .modulation = Modulation::Pam4,
        .grid_nm = kCwdm4GridNm,
        .tx_power_dbm = {{40, {-3.0, 3.0}}, {100, {-2.5, 3.0}}, {200, {-2.0, 3.5}}, {400, {-1.5, 4.0}}},
        .rx_sensitivity_dbm = {{40, -13.0}, {100, -11.5}, {200, -9.5}, {400, -7.5}},
        .rx_overload_dbm = 4.5,
        .extinction_ratio_db = 5.5,
        .fec_ber_threshold = 2.4e-4,
        .supported_rates = {40, 100, 200, 400},
        .latency_ns = 80.0,
    };
    return GenerationTable({g40, g100, g200, g400});
}

InvalidPort::InvalidPort(int port) : Error(fmt::format("circulator has no port {}", port)) {}

int circulate(int port) {
    if (port < 1 || port > 3) throw InvalidPort(port);
    return port == 3 ? 1 : port + 1;
}

std::vector<std::string> Circulator::validate(double directivity_floor_db) const {
    std::vector<std::string> problems;
    if (!(insertion_loss_db > 0.0)) problems.emplace_back("circulator insertion_loss_db must be positive");
    if (!(directivity_db >= directivity_floor_db)) {
        problems.push_back(fmt::format("circulator directivity_db must be >= {}", directivity_floor_db));
    }
    if (!(return_loss_db < 0.0)) problems.emplace_back("circulator return_loss_db must be negative");
    return problems;
}

std::string to_string(ElementKind k) {
    switch (k) {
        case ElementKind::Circulator: return "circulator";
        case ElementKind::Connector: return "connector";
        case ElementKind::Fiber: return "fiber";
        case ElementKind::OcsFacet: return "ocs_facet";
        case ElementKind::OcsCore: return "ocs_core";
    }
    return "unknown";
}

double LinkPath::fiber_m() const {
    double total = 0.0;
    for (const auto& e : elements) total += e.fiber_m;
    return total;
}

double LinkPath::freespace_m() const {
    double total = 0.0;
    for (const auto& e : elements) total += e.freespace_m;
    return total;
}

double LinkPath::total_insertion_loss_db() const {
    double total = 0.0;
    for (const auto& e : elements) total += e.insertion_loss_db;
    return total;
}

int LinkPath::connector_count() const {
    return static_cast<int>(std::count_if(elements.begin(), elements.end(),
                                          [](const PathElement& e) { return e.kind == ElementKind::Connector; }));
}

LinkPath LinkPath::reversed() const {
    LinkPath r;
    r.gen_a = gen_b;
    r.gen_b = gen_a;
    r.elements.assign(elements.rbegin(), elements.rend());
    const int last = static_cast<int>(elements.size()) - 1;
    r.reflections = reflections;
    for (auto& s : r.reflections) s.location = last - s.location;
    std::sort(r.reflections.begin(), r.reflections.end(),
              [](const ReflectionSource& x, const ReflectionSource& y) { return x.location < y.location; });
    if (ocs) {
        r.ocs = ocs;
        std::swap(r.ocs->in_port, r.ocs->out_port);
        std::swap(r.ocs->rl_in_db, r.ocs->rl_out_db);
    }
    return r;
}

LinkPath build_link_path(const LinkSpec& spec) {
    const auto& o = spec.optics;
    if (spec.fiber_a_m < 0.0 || spec.fiber_b_m < 0.0) throw PathInvalid("fiber length must be non-negative");
    if (spec.fiber_a_m + spec.fiber_b_m > o.max_fiber_m) {
        throw PathInvalid(fmt::format("fiber length {} m exceeds {} m", spec.fiber_a_m + spec.fiber_b_m, o.max_fiber_m));
    }

    LinkPath path;
    path.gen_a = spec.gen_a;
    path.gen_b = spec.gen_b;
    path.ocs = spec.ocs;

    const auto add = [&](PathElement e) {
        path.elements.push_back(std::move(e));
        return static_cast<int>(path.elements.size()) - 1;
    };
    const auto reflect = [&](int at, double rl_db, ReflectionKind kind = ReflectionKind::Reflection) {
        path.reflections.push_back({at, rl_db, kind});
    };
    const auto circulator = [&](const char* label) {
        if (!o.circulators) return;
        const int at = add({ElementKind::Circulator, label, o.circulator.insertion_loss_db, 0.0, 0.0});
        reflect(at, o.circulator.return_loss_db);
        reflect(at, -o.circulator.directivity_db, ReflectionKind::Leakage);
    };
    const auto connectors = [&](const char* side) {
        for (int i = 0; i <= o.patch_panels; ++i) {
            const int at = add({ElementKind::Connector, fmt::format("connector_{}{}", side, i), o.connector.loss_db, 0.0, 0.0});
            reflect(at, o.connector.return_loss_db);
        }
    };
    const auto fiber = [&](const char* label, double m) {
        add({ElementKind::Fiber, label, o.fiber_attenuation_db_per_km * m / 1000.0, m, 0.0});
    };

    circulator("circulator_a");
    connectors("a");
    fiber("fiber_a", spec.fiber_a_m);
    if (spec.ocs) {
        const auto& t = *spec.ocs;
        reflect(add({ElementKind::OcsFacet, "ocs_in", 0.0, 0.0, 0.0}), t.rl_in_db);
        add({ElementKind::OcsCore, fmt::format("ocs{}:{}->{}", t.ocs_id, t.in_port, t.out_port), t.insertion_loss_db, 0.0,
             t.freespace_m});
        reflect(add({ElementKind::OcsFacet, "ocs_out", 0.0, 0.0, 0.0}), t.rl_out_db);
    }
    fiber("fiber_b", spec.fiber_b_m);
    connectors("b");
    circulator("circulator_b");
    return path;
}

double propagation_delay_ns(const LinkPath& path) {
    return kFiberNsPerM * path.fiber_m() + kFreespaceNsPerM * path.freespace_m() + path.gen_a.latency_ns +
           path.gen_b.latency_ns;
}

double aggregate_reflections(const LinkPath& path) {
    // Prefix sums: loss(i, j) covers elements strictly between the two sources.
    std::vector<double> prefix(path.elements.size() + 1, 0.0);
    for (std::size_t k = 0; k < path.elements.size(); ++k) prefix[k + 1] = prefix[k] + path.elements[k].insertion_loss_db;
    const auto between = [&](int i, int j) {
        if (i > j) std::swap(i, j);
        if (j - i <= 1) return 0.0;
        return prefix[static_cast<std::size_t>(j)] - prefix[static_cast<std::size_t>(i) + 1];
    };

    double epsilon = 0.0;
    const auto& src = path.reflections;
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (src[i].kind == ReflectionKind::Leakage) {
            epsilon += db_to_ratio(src[i].return_loss_db);
            continue;
        }
        for (std::size_t j = i + 1; j < src.size(); ++j) {
            if (src[j].kind != ReflectionKind::Reflection) continue;
            const double round_trip = db_to_ratio(-2.0 * between(src[i].location, src[j].location));
            epsilon += db_to_ratio(src[i].return_loss_db) * db_to_ratio(src[j].return_loss_db) * round_trip;
        }
    }
    return epsilon;
}

PenaltyUnbounded::PenaltyUnbounded(double epsilon)
    : Error(fmt::format("interference ratio {:.3g} closes the eye", epsilon)) {}

double mpi_penalty_db(double epsilon, Modulation modulation) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
    const double closure = eye_multiplier(modulation) * 2.0 * std::sqrt(epsilon);
    if (closure >= 1.0) throw PenaltyUnbounded(epsilon);
    return -10.0 * std::log10(1.0 - closure);
}

MpiOracleResult mpi_oracle(double epsilon, Modulation modulation, std::size_t samples, std::uint64_t seed,
                           bool parallel) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");
    if (samples == 0) throw std::invalid_argument("mpi oracle needs at least one sample");
    std::vector<double> penalties(samples);
    if (parallel) {
        kernels::eye_penalty_samples_parallel(epsilon, modulation_levels(modulation), seed, penalties);
    } else {
        kernels::eye_penalty_samples_serial(epsilon, modulation_levels(modulation), seed, penalties);
    }
    return {kernels::quantile_in_place(penalties, 0.999), samples};
}

Negotiated negotiate_interop(const TransceiverGeneration& a, const TransceiverGeneration& b) {
    const auto& [lo, hi] = std::minmax(a, b, [](const auto& x, const auto& y) {
        return std::pair(x.native_rate(), x.name) < std::pair(y.native_rate(), y.name);
    });
    Negotiated n;
    if (a.grid_nm != b.grid_nm) {
        n.reason = fmt::format("grid mismatch between {} and {}", lo.name, hi.name);
        return n;
    }
    int rate = 0;
    for (int r : lo.supported_rates) {
        if (hi.supports(r)) rate = std::max(rate, r);
    }
    if (rate == 0) {
        n.reason = fmt::format("no common rate between {} and {}", lo.name, hi.name);
        return n;
    }
    // The rate's native generation defines the modulation and FEC mode.
    const TransceiverGeneration& native = hi.native_rate() == rate ? hi : lo;
    for (const auto* g : {&lo, &hi}) {
        if (g == &native) continue;
        if (!contains(g->rx_window(rate), native.rx_window(rate))) {
            n.reason = fmt::format("{} receiver window at {} G does not cover {}", g->name, rate, native.name);
            return n;
        }
    }
    n.compatible = true;
    n.rate_gbps = rate;
    n.modulation = native.modulation;
    n.fec_ber_threshold = native.fec_ber_threshold;
    return n;
}

LinkBudget link_budget(const LinkPath& path, const Negotiated& rate) {
    if (!rate.compatible) throw std::invalid_argument("link budget needs a negotiated rate");
    const PowerRange tx = path.gen_a.tx_power_dbm.at(rate.rate_gbps);
    const double sensitivity = path.gen_b.rx_sensitivity_dbm.at(rate.rate_gbps);

    LinkBudget b;
    b.total_loss_db = path.total_insertion_loss_db();
    b.epsilon = aggregate_reflections(path);
    b.mpi_penalty_db = mpi_penalty_db(b.epsilon, rate.modulation);
    b.margin_db = tx.min_dbm - b.total_loss_db - b.mpi_penalty_db - sensitivity;
    b.max_received_dbm = tx.max_dbm - b.total_loss_db;
    if (b.max_received_dbm > path.gen_b.rx_overload_dbm) {
        throw OverloadViolation(fmt::format("received {:.2f} dBm exceeds overload {:.2f} dBm", b.max_received_dbm,
                                            path.gen_b.rx_overload_dbm));
    }
    return b;
}

double ber_from_q(double q) { return 0.5 * std::erfc(q / std::sqrt(2.0)); }

double q_from_ber(double ber) {
    if (!(ber > 0.0 && ber < 0.5)) throw std::invalid_argument("ber must be in (0, 0.5)");
    double lo = 0.0;
    double hi = 40.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (ber_from_q(mid) > ber ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double ber_from_margin(double margin_db, double ber_threshold) {
    return ber_from_q(q_from_ber(ber_threshold) * std::pow(10.0, margin_db / 20.0));
}

QualificationResult qualify_link(const LinkPath& path, const Negotiated& rate, PhysicalState state, std::uint64_t seed,
                                 double flake_probability) {
    Rng rng(derive_seed(seed, 0xBE27));
    const bool flake = rng.bernoulli(flake_probability);

    QualificationResult q;
    if (!state.cross_connect_in_place || !state.dark_time_elapsed || !path.ocs) {
        q.detail = "audit: path not complete end to end";
        return q;
    }
    if (!rate.compatible) {
        q.detail = "audit: " + rate.reason;
        return q;
    }
    q.audit_pass = true;
    q.bert_run = true;
    try {
        q.margin_db = std::min(link_budget(path, rate).margin_db, link_budget(path.reversed(), rate).margin_db);
    } catch (const OverloadViolation& e) {
        q.detail = std::string("bert: ") + e.what();
        return q;
    } catch (const PenaltyUnbounded& e) {
        q.detail = std::string("bert: ") + e.what();
        return q;
    }
    q.estimated_ber = ber_from_margin(q.margin_db, rate.fec_ber_threshold);
    q.bert_pass = q.estimated_ber <= rate.fec_ber_threshold;
    if (q.bert_pass && flake) {
        q.bert_pass = false;
        q.detail = "bert: spurious failure";
    } else {
        q.detail = q.bert_pass ? "bert: pass" : "bert: ber above threshold";
    }
    return q;
}

}  // namespace ocsfab
