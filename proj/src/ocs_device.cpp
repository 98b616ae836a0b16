#include "ocsfab/ocs_device.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "ocsfab/kernels.hpp"
#include "ocsfab/rng.hpp"

namespace ocsfab {

DeviceProfile DeviceProfile::commercial() {
    DeviceProfile p;
    p.switch_time_ms = 15.0;
    return p;
}

std::vector<std::string> DeviceProfile::validate() const {
    std::vector<std::string> problems;
    if (radix < 1 || radix > kMirrorsPerDie) {
        problems.push_back(fmt::format("radix must be in [1, {}]", kMirrorsPerDie));
    }
    if (spare_ports < 0 || spare_ports >= radix) problems.emplace_back("spare_ports must be in [0, radix)");
    if (!(mirror_yield >= 0.0 && mirror_yield <= 1.0)) problems.emplace_back("mirror_yield must be in [0, 1]");
    if (!(il_sigma_db >= 0.0)) problems.emplace_back("il_sigma_db must be non-negative");
    if (!(il_min_db <= il_max_db)) problems.emplace_back("il_min_db must not exceed il_max_db");
    if (!(rl_sigma_db >= 0.0)) problems.emplace_back("rl_sigma_db must be non-negative");
    if (!(switch_time_ms >= 0.0)) problems.emplace_back("switch_time_ms must be non-negative");
    if (hv_boards < 1) problems.emplace_back("hv_boards must be at least 1");
    if (psus < min_psus + 1 || fans < min_fans + 1) {
        problems.emplace_back("psus/fans must exceed their redundancy floors");
    }
    if (!(base_power_w >= 0.0 && per_connection_power_w >= 0.0)) {
        problems.emplace_back("power coefficients must be non-negative");
    } else if (base_power_w + per_connection_power_w * radix > max_power_w) {
        problems.push_back(fmt::format("fully connected draw {} W exceeds max_power_w {} W",
                                       base_power_w + per_connection_power_w * radix, max_power_w));
    }
    if (!(coupling_min <= coupling_max)) problems.emplace_back("coupling_min must not exceed coupling_max");
    return problems;
}

int MirrorDie::healthy_count() const {
    return static_cast<int>(std::count_if(mirrors.begin(), mirrors.end(), [](const Mirror& m) { return m.healthy; }));
}

std::vector<int> MirrorDie::down_select(int count) const {
    std::vector<int> order;
    for (int i = 0; i < kMirrorsPerDie; ++i) {
        if (mirrors[i].healthy) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return mirrors[a].coupling_score > mirrors[b].coupling_score;
    });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(count)));
    std::sort(order.begin(), order.end());
    return order;
}

ManufacturingFailure::ManufacturingFailure(int die, int healthy)
    : Error(fmt::format("die {} has only {} healthy mirrors", die, healthy)), die_index(die), healthy_count(healthy) {}

PortOutOfRange::PortOutOfRange(int p) : Error(fmt::format("port {} out of range", p)), port(p) {}
PortBusy::PortBusy(int p) : Error(fmt::format("port {} already connected", p)), port(p) {}
NotConnected::NotConnected(int p) : Error(fmt::format("port {} is not connected", p)), port(p) {}
UnknownPath::UnknownPath(int in_port, int out_port)
    : Error(fmt::format("no calibration entry for {} -> {}", in_port, out_port)) {}

bool operator==(const CalibrationEntry& a, const CalibrationEntry& b) {
    return a.voltages == b.voltages && a.insertion_loss_db == b.insertion_loss_db;
}

CalibrationTable::CalibrationTable(int radix, std::array<std::vector<int>, kDiesPerDevice> port_map)
    : radix_(radix),
      port_map_(std::move(port_map)),
      entries_(static_cast<std::size_t>(radix) * radix),
      rl_in_(static_cast<std::size_t>(radix)),
      rl_out_(static_cast<std::size_t>(radix)) {}

const CalibrationEntry& CalibrationTable::at(int in_port, int out_port) const {
    if (in_port < 1 || in_port > radix_ || out_port < 1 || out_port > radix_) throw UnknownPath(in_port, out_port);
    return entries_[static_cast<std::size_t>(in_port - 1) * radix_ + (out_port - 1)];
}

CalibrationEntry& CalibrationTable::at(int in_port, int out_port) {
    return const_cast<CalibrationEntry&>(std::as_const(*this).at(in_port, out_port));
}

int CalibrationTable::mirror_for_port(int die, int port) const { return port_map_.at(die).at(port - 1); }

double CalibrationTable::max_insertion_loss_db() const {
    double m = 0.0;
    for (const auto& e : entries_) m = std::max(m, e.insertion_loss_db);
    return m;
}

double CalibrationTable::max_return_loss_db() const {
    double m = -1e300;
    for (double v : rl_in_) m = std::max(m, v);
    for (double v : rl_out_) m = std::max(m, v);
    return m;
}

int OcsChassisState::healthy_psus() const {
    return static_cast<int>(std::count(psu_healthy.begin(), psu_healthy.end(), true));
}

int OcsChassisState::healthy_fans() const {
    return static_cast<int>(std::count(fan_healthy.begin(), fan_healthy.end(), true));
}

OcsDevice OcsDevice::manufacture(const DeviceProfile& profile, std::uint64_t seed) {
    if (auto problems = profile.validate(); !problems.empty()) throw ConfigInvalid(problems.front());

    OcsDevice dev;
    dev.profile_ = profile;
    for (int d = 0; d < kDiesPerDevice; ++d) {
        Rng rng(derive_seed(seed, 0xD1E, static_cast<std::uint64_t>(d)));
        for (auto& m : dev.dies_[d].mirrors) {
            m.healthy = rng.bernoulli(profile.mirror_yield);
            const double score = rng.uniform(profile.coupling_min, profile.coupling_max);
            m.coupling_score = m.healthy ? score : 0.0;
        }
        const int healthy = dev.dies_[d].healthy_count();
        if (healthy < profile.radix) throw ManufacturingFailure(d, healthy);
        dev.selected_[d] = dev.dies_[d].down_select(profile.radix);
    }
    dev.in_to_out_.assign(static_cast<std::size_t>(profile.radix) + 1, 0);
    dev.out_to_in_.assign(static_cast<std::size_t>(profile.radix) + 1, 0);
    dev.chassis_.psu_healthy.assign(static_cast<std::size_t>(profile.psus), true);
    dev.chassis_.fan_healthy.assign(static_cast<std::size_t>(profile.fans), true);
    dev.chassis_.hv_board_healthy.assign(static_cast<std::size_t>(profile.hv_boards), true);
    dev.chassis_.spare_ports = profile.spare_ports;
    return dev;
}

void OcsDevice::install_calibration(CalibrationTable table) {
    if (table.radix() != radix()) throw Error("calibration radix does not match device");
    calibration_ = std::move(table);
}

const CalibrationTable& OcsDevice::calibration() const {
    if (!calibration_) throw NotCalibrated();
    return *calibration_;
}

void OcsDevice::check_port(int port) const {
    if (port < 1 || port > radix()) throw PortOutOfRange(port);
}

std::optional<int> OcsDevice::output_for(int in_port) const {
    check_port(in_port);
    if (int o = in_to_out_[in_port]; o != 0) return o;
    return std::nullopt;
}

std::optional<int> OcsDevice::input_for(int out_port) const {
    check_port(out_port);
    if (int i = out_to_in_[out_port]; i != 0) return i;
    return std::nullopt;
}

ReconfigReceipt OcsDevice::connect(int in_port, int out_port) {
    check_port(in_port);
    check_port(out_port);
    if (in_to_out_[in_port] != 0) throw PortBusy(in_port);
    if (out_to_in_[out_port] != 0) throw PortBusy(out_port);
    in_to_out_[in_port] = out_port;
    out_to_in_[out_port] = in_port;
    ++connection_count_;
    return {.connected = 1, .disconnected = 0, .dark_time_ms = profile_.switch_time_ms};
}

ReconfigReceipt OcsDevice::disconnect(int in_port) {
    check_port(in_port);
    const int out = in_to_out_[in_port];
    if (out == 0) throw NotConnected(in_port);
    in_to_out_[in_port] = 0;
    out_to_in_[out] = 0;
    --connection_count_;
    return {.connected = 0, .disconnected = 1, .dark_time_ms = 0.0};
}

ReconfigReceipt OcsDevice::apply_permutation(std::span<const int> mapping) {
    if (mapping.size() > static_cast<std::size_t>(radix())) {
        throw InvalidPermutation("permutation longer than device radix");
    }
    std::vector<bool> seen(static_cast<std::size_t>(radix()) + 1, false);
    for (int o : mapping) {
        if (o == 0) continue;
        if (o < 0 || o > radix()) throw InvalidPermutation(fmt::format("output {} out of range", o));
        if (seen[o]) throw InvalidPermutation(fmt::format("output {} used twice", o));
        seen[o] = true;
    }

    ReconfigReceipt receipt;
    const auto target = [&](int in) { return in <= static_cast<int>(mapping.size()) ? mapping[in - 1] : 0; };
    for (int in = 1; in <= radix(); ++in) {
        if (in_to_out_[in] != 0 && in_to_out_[in] != target(in)) {
            out_to_in_[in_to_out_[in]] = 0;
            in_to_out_[in] = 0;
            --connection_count_;
            ++receipt.disconnected;
        }
    }
    for (int in = 1; in <= radix(); ++in) {
        const int o = target(in);
        if (o != 0 && in_to_out_[in] != o) {
            in_to_out_[in] = o;
            out_to_in_[o] = in;
            ++connection_count_;
            ++receipt.connected;
        }
    }
    receipt.dark_time_ms = receipt.connected > 0 ? profile_.switch_time_ms : 0.0;
    return receipt;
}

std::vector<CrossConnect> OcsDevice::connections() const {
    std::vector<CrossConnect> out;
    out.reserve(static_cast<std::size_t>(connection_count_));
    for (int in = 1; in <= radix(); ++in) {
        if (in_to_out_[in] != 0) out.push_back({in, in_to_out_[in]});
    }
    return out;
}

double OcsDevice::insertion_loss_db(int in_port, int out_port) const {
    return calibration().at(in_port, out_port).insertion_loss_db;
}

double OcsDevice::return_loss_db(PortSide side, int port) const {
    const auto& cal = calibration();
    if (port < 1 || port > radix()) throw PortOutOfRange(port);
    const auto& v = side == PortSide::In ? cal.return_loss_in() : cal.return_loss_out();
    return v[static_cast<std::size_t>(port - 1)];
}

double OcsDevice::loss_query(LossKind kind, int in_port, std::optional<int> out_port) const {
    if (!calibrated()) throw NotCalibrated();
    if (kind == LossKind::Return) return return_loss_db(PortSide::In, in_port);
    if (!out_port) throw UnknownPath(in_port, 0);
    return insertion_loss_db(in_port, *out_port);
}

bool OcsDevice::operational() const {
    return chassis_.healthy_psus() >= profile_.min_psus && chassis_.healthy_fans() >= profile_.min_fans;
}

void OcsDevice::fail_fru(Fru fru) {
    switch (fru.kind) {
        case FruKind::Psu: chassis_.psu_healthy.at(static_cast<std::size_t>(fru.index)) = false; break;
        case FruKind::Fan: chassis_.fan_healthy.at(static_cast<std::size_t>(fru.index)) = false; break;
        case FruKind::HvBoard: chassis_.hv_board_healthy.at(static_cast<std::size_t>(fru.index)) = false; break;
    }
}

int OcsDevice::hv_board_for_port(int port) const {
    check_port(port);
    const int block = (radix() + profile_.hv_boards - 1) / profile_.hv_boards;
    return (port - 1) / block;
}

SwapReport OcsDevice::hot_swap_fru(Fru fru) {
    if (!operational()) throw DeviceNotOperational();
    SwapReport report{fru, {}};
    const auto remaining = [](const std::vector<bool>& units, int index) {
        int n = 0;
        for (std::size_t i = 0; i < units.size(); ++i) {
            if (units[i] && static_cast<int>(i) != index) ++n;
        }
        return n;
    };
    switch (fru.kind) {
        case FruKind::Psu:
            if (remaining(chassis_.psu_healthy, fru.index) < profile_.min_psus) {
                throw RedundancyViolated(fmt::format("removing psu {} leaves no healthy supply", fru.index));
            }
            chassis_.psu_healthy.at(static_cast<std::size_t>(fru.index)) = true;
            break;
        case FruKind::Fan:
            if (remaining(chassis_.fan_healthy, fru.index) < profile_.min_fans) {
                throw RedundancyViolated(fmt::format("removing fan {} drops below {} fans", fru.index, profile_.min_fans));
            }
            chassis_.fan_healthy.at(static_cast<std::size_t>(fru.index)) = true;
            break;
        case FruKind::HvBoard: {
            chassis_.hv_board_healthy.at(static_cast<std::size_t>(fru.index)) = true;
            for (const auto& c : connections()) {
                if (hv_board_for_port(c.in_port) == fru.index || hv_board_for_port(c.out_port) == fru.index) {
                    report.dropped.push_back(c);
                }
            }
            for (const auto& c : report.dropped) disconnect(c.in_port);
            break;
        }
    }
    return report;
}

double OcsDevice::power_draw_w() const {
    return profile_.base_power_w + profile_.per_connection_power_w * connection_count_;
}

bool OcsDevice::operator==(const OcsDevice& other) const {
    const auto die_eq = [](const MirrorDie& a, const MirrorDie& b) {
        for (int i = 0; i < kMirrorsPerDie; ++i) {
            const auto& x = a.mirrors[i];
            const auto& y = b.mirrors[i];
            if (x.healthy != y.healthy || x.coupling_score != y.coupling_score || x.axes != y.axes) return false;
        }
        return true;
    };
    return die_eq(dies_[0], other.dies_[0]) && die_eq(dies_[1], other.dies_[1]) && selected_ == other.selected_ &&
           calibration_ == other.calibration_ && in_to_out_ == other.in_to_out_ &&
           chassis_.psu_healthy == other.chassis_.psu_healthy && chassis_.fan_healthy == other.chassis_.fan_healthy &&
           chassis_.hv_board_healthy == other.chassis_.hv_board_healthy;
}

CalibrationTable calibrate(const OcsDevice& device, std::uint64_t seed) {
    const auto& p = device.profile();
    CalibrationTable table(p.radix, {device.selected(0), device.selected(1)});
    kernels::CalibrationParams params{
        .radix = p.radix,
        .seed = derive_seed(seed, 0xCA1),
        .il_mean_db = p.il_mean_db,
        .il_sigma_db = p.il_sigma_db,
        .il_min_db = p.il_min_db,
        .il_max_db = p.il_max_db,
        .in_mirrors = table.port_map(0),
        .out_mirrors = table.port_map(1),
    };
    kernels::fill_calibration_parallel(params, table.entries());

    Rng rl(derive_seed(seed, 0x9E7));
    for (auto* side : {&table.return_loss_in(), &table.return_loss_out()}) {
        for (double& v : *side) v = std::min(rl.normal(p.rl_mean_db, p.rl_sigma_db), p.rl_spec_db);
    }
    return table;
}

std::string to_string(FruKind kind) {
    switch (kind) {
        case FruKind::Psu: return "psu";
        case FruKind::Fan: return "fan";
        case FruKind::HvBoard: return "hv_board";
    }
    return "unknown";
}

}  // namespace ocsfab
