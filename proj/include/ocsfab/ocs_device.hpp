#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocsfab/errors.hpp"

namespace ocsfab {

inline constexpr int kMirrorsPerDie = 176;
inline constexpr int kAxesPerMirror = 4;
inline constexpr int kDiesPerDevice = 2;

// Configurable device profile. Defaults describe the 136-port MEMS switch.
struct DeviceProfile {
    int radix = 136;
    int spare_ports = 8;
    double il_mean_db = 1.4;
    double il_sigma_db = 0.2;
    double il_min_db = 0.5;
    double il_max_db = 2.0;
    double rl_mean_db = -46.0;
    double rl_sigma_db = 2.0;
    double rl_spec_db = -38.0;
    double switch_time_ms = 10.0;
    double mirror_yield = 0.95;
    double coupling_min = 0.9;
    double coupling_max = 1.0;
    int hv_boards = 8;
    int psus = 2;
    int fans = 4;
    int min_psus = 1;
    int min_fans = 2;
    double base_power_w = 50.0;
    double per_connection_power_w = 0.42;
    double max_power_w = 108.0;
    // Free-space beam path inside the optical core.
    double freespace_m = 0.0;

    // Comparison profile for a generic commercial switch (slower control loop).
    static DeviceProfile commercial();

    // Returns a list of human-readable problems; empty when the profile is usable.
    std::vector<std::string> validate() const;
};

struct Mirror {
    bool healthy = false;
    double coupling_score = 0.0;
    std::array<double, kAxesPerMirror> axes{};
};

struct MirrorDie {
    std::array<Mirror, kMirrorsPerDie> mirrors{};

    int healthy_count() const;
    // Indices of the `count` best mirrors, ordered by ascending mirror index.
    std::vector<int> down_select(int count) const;
};

class ManufacturingFailure : public Error {
public:
    ManufacturingFailure(int die_index, int healthy_count);
    int die_index;
    int healthy_count;
};

class PortOutOfRange : public Error {
public:
    explicit PortOutOfRange(int port);
    int port;
};

class PortBusy : public Error {
public:
    explicit PortBusy(int port);
    int port;
};

class NotConnected : public Error {
public:
    explicit NotConnected(int port);
    int port;
};

class InvalidPermutation : public Error {
public:
    using Error::Error;
};

class NotCalibrated : public Error {
public:
    NotCalibrated() : Error("device is not calibrated") {}
};

class UnknownPath : public Error {
public:
    UnknownPath(int in_port, int out_port);
};

class RedundancyViolated : public Error {
public:
    using Error::Error;
};

class DeviceNotOperational : public Error {
public:
    DeviceNotOperational() : Error("device is not operational") {}
};

struct CalibrationEntry {
    // Driven axis voltages: input mirror (x, y) then output mirror (x, y).
    // The sign selects which comb pair of the four axes is driven.
    std::array<float, 4> voltages{};
    double insertion_loss_db = 0.0;
};

class CalibrationTable {
public:
    CalibrationTable() = default;
    CalibrationTable(int radix, std::array<std::vector<int>, kDiesPerDevice> port_map);

    int radix() const { return radix_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const CalibrationEntry& at(int in_port, int out_port) const;
    CalibrationEntry& at(int in_port, int out_port);
    std::span<const CalibrationEntry> entries() const { return entries_; }
    std::span<CalibrationEntry> entries() { return entries_; }

    // Mirror index on `die` that backs `port` (1-based).
    int mirror_for_port(int die, int port) const;
    const std::vector<int>& port_map(int die) const { return port_map_[die]; }

    // Per-port return loss, indexed by port - 1.
    std::vector<double>& return_loss_in() { return rl_in_; }
    std::vector<double>& return_loss_out() { return rl_out_; }
    const std::vector<double>& return_loss_in() const { return rl_in_; }
    const std::vector<double>& return_loss_out() const { return rl_out_; }

    double max_insertion_loss_db() const;
    double max_return_loss_db() const;

    bool operator==(const CalibrationTable&) const = default;

private:
    int radix_ = 0;
    std::array<std::vector<int>, kDiesPerDevice> port_map_;
    std::vector<CalibrationEntry> entries_;
    std::vector<double> rl_in_;
    std::vector<double> rl_out_;
};

bool operator==(const CalibrationEntry& a, const CalibrationEntry& b);

struct CrossConnect {
    int in_port = 0;
    int out_port = 0;
    auto operator<=>(const CrossConnect&) const = default;
};

struct ReconfigReceipt {
    int connected = 0;
    int disconnected = 0;
    // Paths that are dark while mirrors settle. Untouched paths carry light.
    double dark_time_ms = 0.0;
};

enum class FruKind { Psu, Fan, HvBoard };

struct Fru {
    FruKind kind;
    int index = 0;
};

struct SwapReport {
    Fru fru;
    std::vector<CrossConnect> dropped;
};

enum class LossKind { Insertion, Return };
enum class PortSide { In, Out };

struct OcsChassisState {
    std::vector<bool> psu_healthy;
    std::vector<bool> fan_healthy;
    std::vector<bool> hv_board_healthy;
    int spare_ports = 0;

    int healthy_psus() const;
    int healthy_fans() const;
};

// One switch instance: its dies, calibration, chassis and cross-connect state.
// Single owner; copy to snapshot.
class OcsDevice {
public:
    static OcsDevice manufacture(const DeviceProfile& profile, std::uint64_t seed);

    const DeviceProfile& profile() const { return profile_; }
    const MirrorDie& die(int index) const { return dies_.at(index); }
    // Selected mirror indices per die, ascending; port p uses element p - 1.
    const std::vector<int>& selected(int die) const { return selected_.at(die); }

    int radix() const { return profile_.radix; }
    int spare_ports() const { return profile_.spare_ports; }
    bool is_spare(int port) const { return port > radix() - spare_ports(); }

    void install_calibration(CalibrationTable table);
    bool calibrated() const { return calibration_.has_value(); }
    const CalibrationTable& calibration() const;

    ReconfigReceipt connect(int in_port, int out_port);
    ReconfigReceipt disconnect(int in_port);
    // `mapping[i]` is the output for input i + 1, or 0 to leave it unconnected.
    ReconfigReceipt apply_permutation(std::span<const int> mapping);

    std::optional<int> output_for(int in_port) const;
    std::optional<int> input_for(int out_port) const;
    bool in_free(int in_port) const { return !output_for(in_port).has_value(); }
    bool out_free(int out_port) const { return !input_for(out_port).has_value(); }
    std::vector<CrossConnect> connections() const;
    int connection_count() const { return connection_count_; }

    double insertion_loss_db(int in_port, int out_port) const;
    double return_loss_db(PortSide side, int port) const;
    double loss_query(LossKind kind, int in_port, std::optional<int> out_port = std::nullopt) const;

    const OcsChassisState& chassis() const { return chassis_; }
    bool operational() const;
    void fail_fru(Fru fru);
    SwapReport hot_swap_fru(Fru fru);
    // HV board that drives the mirrors behind a port on either die.
    int hv_board_for_port(int port) const;

    double power_draw_w() const;

    bool operator==(const OcsDevice&) const;

private:
    OcsDevice() = default;
    void check_port(int port) const;

    DeviceProfile profile_;
    std::array<MirrorDie, kDiesPerDevice> dies_{};
    std::array<std::vector<int>, kDiesPerDevice> selected_;
    std::optional<CalibrationTable> calibration_;
    std::vector<int> in_to_out_;
    std::vector<int> out_to_in_;
    int connection_count_ = 0;
    OcsChassisState chassis_;
};

// Builds the full radix x radix table of mirror voltages and losses.
CalibrationTable calibrate(const OcsDevice& device, std::uint64_t seed);

std::string to_string(FruKind kind);

}  // namespace ocsfab
