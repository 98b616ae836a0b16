#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ocsfab/errors.hpp"

namespace ocsfab {

enum class Modulation { Nrz, Pam4 };

int modulation_levels(Modulation m);
// Inner-eye amplitude relative to the outer eye is 1 / multiplier.
int eye_multiplier(Modulation m);
std::string to_string(Modulation m);
std::optional<Modulation> parse_modulation(const std::string& s);

// CWDM4 O-band grid in nm.
inline const std::vector<double> kCwdm4GridNm{1271.0, 1291.0, 1311.0, 1331.0};

struct PowerRange {
    double min_dbm = 0.0;
    double max_dbm = 0.0;
    bool operator==(const PowerRange&) const = default;
};

struct TransceiverGeneration {
    std::string name;
    double per_lane_gbps = 0.0;
    int lanes = 4;
    Modulation modulation = Modulation::Nrz;
    std::vector<double> grid_nm = kCwdm4GridNm;
    // Keyed by total rate in Gb/s.
    std::map<int, PowerRange> tx_power_dbm;
    std::map<int, double> rx_sensitivity_dbm;
    double rx_overload_dbm = 0.0;
    double extinction_ratio_db = 0.0;
    double fec_ber_threshold = 1e-12;
    std::vector<int> supported_rates;
    double latency_ns = 0.0;

    int native_rate() const;
    bool supports(int rate) const;
    // Receiver dynamic range [sensitivity, overload] at a rate.
    PowerRange rx_window(int rate) const;
    std::vector<std::string> validate() const;

    bool operator==(const TransceiverGeneration&) const = default;
};

class GenerationTable {
public:
    GenerationTable() = default;
    explicit GenerationTable(std::vector<TransceiverGeneration> generations);

    const std::vector<TransceiverGeneration>& all() const { return generations_; }
    const TransceiverGeneration* find(const std::string& name) const;
    const TransceiverGeneration& at(const std::string& name) const;
    // Checks each generation plus the cross-generation invariants: a shared
    // grid and receiver windows that cover every older generation they claim.
    std::vector<std::string> validate() const;

private:
    std::vector<TransceiverGeneration> generations_;
};

// 40/100/200/400 GbE over CWDM4.
GenerationTable default_generation_table();

class InvalidPort : public Error {
public:
    explicit InvalidPort(int port);
};

// 1 -> 2 -> 3 -> 1.
int circulate(int port);

struct Circulator {
    double insertion_loss_db = 0.8;
    double directivity_db = 50.0;
    double return_loss_db = -50.0;

    std::vector<std::string> validate(double directivity_floor_db = 30.0) const;
};

struct Connector {
    double loss_db = 0.25;
    double return_loss_db = -55.0;
};

struct LinkOptics {
    bool circulators = true;
    Circulator circulator;
    Connector connector;
    // Each patch panel adds one mated connector on each side.
    int patch_panels = 0;
    double fiber_attenuation_db_per_km = 0.35;
    double max_fiber_m = 1000.0;
};

enum class ElementKind { Circulator, Connector, Fiber, OcsFacet, OcsCore };
std::string to_string(ElementKind k);

struct PathElement {
    ElementKind kind;
    std::string label;
    double insertion_loss_db = 0.0;
    double fiber_m = 0.0;
    double freespace_m = 0.0;
};

enum class ReflectionKind { Reflection, Leakage };

struct ReflectionSource {
    int location = 0;
    // For leakage this is the negated directivity.
    double return_loss_db = 0.0;
    ReflectionKind kind = ReflectionKind::Reflection;
};

struct OcsTraversal {
    int ocs_id = 0;
    int in_port = 0;
    int out_port = 0;
    double insertion_loss_db = 0.0;
    double rl_in_db = -100.0;
    double rl_out_db = -100.0;
    double freespace_m = 0.0;
};

// Ordered element chain from the A-side transmitter to the B-side receiver.
struct LinkPath {
    TransceiverGeneration gen_a;
    TransceiverGeneration gen_b;
    std::vector<PathElement> elements;
    std::vector<ReflectionSource> reflections;
    std::optional<OcsTraversal> ocs;

    double fiber_m() const;
    double freespace_m() const;
    double total_insertion_loss_db() const;
    int connector_count() const;
    LinkPath reversed() const;
};

struct LinkSpec {
    TransceiverGeneration gen_a;
    TransceiverGeneration gen_b;
    LinkOptics optics;
    double fiber_a_m = 0.0;
    double fiber_b_m = 0.0;
    std::optional<OcsTraversal> ocs;
};

class PathInvalid : public Error {
public:
    using Error::Error;
};

// Lays out circulators, connectors, fiber and the OCS traversal, and fills in
// every reflection source along the way.
LinkPath build_link_path(const LinkSpec& spec);

// fiber at 5 ns/m, free space at 3.3 ns/m, plus both transceivers.
double propagation_delay_ns(const LinkPath& path);

// Pairwise reflection products weighted by round-trip transmittance, plus
// direct circulator leakage. Unitless power ratio.
double aggregate_reflections(const LinkPath& path);

class PenaltyUnbounded : public Error {
public:
    explicit PenaltyUnbounded(double epsilon);
};

double mpi_penalty_db(double epsilon, Modulation modulation);

struct MpiOracleResult {
    double penalty_p999_db = 0.0;
    std::size_t samples = 0;
};

// Monte Carlo eye-closure estimate at the 99.9th percentile.
MpiOracleResult mpi_oracle(double epsilon, Modulation modulation, std::size_t samples, std::uint64_t seed,
                           bool parallel = true);

struct Negotiated {
    bool compatible = false;
    int rate_gbps = 0;
    Modulation modulation = Modulation::Nrz;
    double fec_ber_threshold = 0.0;
    std::string reason;

    bool operator==(const Negotiated&) const = default;
};

Negotiated negotiate_interop(const TransceiverGeneration& a, const TransceiverGeneration& b);

class OverloadViolation : public Error {
public:
    using Error::Error;
};

struct LinkBudget {
    double margin_db = 0.0;
    double total_loss_db = 0.0;
    double epsilon = 0.0;
    double mpi_penalty_db = 0.0;
    double max_received_dbm = 0.0;
};

// Budget for the A -> B direction at the negotiated rate.
LinkBudget link_budget(const LinkPath& path, const Negotiated& rate);

// Pre-FEC BER estimate from margin: Q scales as 10^(margin/20) from the Q that
// lands exactly on the threshold.
double ber_from_margin(double margin_db, double ber_threshold);
double q_from_ber(double ber);
double ber_from_q(double q);

struct PhysicalState {
    bool cross_connect_in_place = true;
    bool dark_time_elapsed = true;
};

struct QualificationResult {
    bool audit_pass = false;
    bool bert_run = false;
    bool bert_pass = false;
    double estimated_ber = 1.0;
    double margin_db = 0.0;
    std::string detail;
};

// Cable audit, then BERT on both directions. `flake_probability` injects
// spurious BERT failures.
QualificationResult qualify_link(const LinkPath& path, const Negotiated& rate, PhysicalState state,
                                 std::uint64_t seed, double flake_probability = 0.0);

}  // namespace ocsfab
