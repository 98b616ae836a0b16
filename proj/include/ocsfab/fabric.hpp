#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ocsfab/errors.hpp"
#include "ocsfab/ocs_device.hpp"
#include "ocsfab/optical_link.hpp"

namespace ocsfab {

// Symmetric inter-AB link counts with a zero diagonal.
class StripingMatrix {
public:
    StripingMatrix() = default;
    explicit StripingMatrix(int n) : n_(n), counts_(static_cast<std::size_t>(n) * n, 0) {}

    int size() const { return n_; }
    int at(int a, int b) const { return counts_[index(a, b)]; }
    void set(int a, int b, int links);
    void add(int a, int b, int delta) { set(a, b, at(a, b) + delta); }
    int row_sum(int a) const;
    int total_links() const;
    // Unordered pairs (a < b) in lexicographic order.
    std::vector<std::pair<int, int>> pairs() const;

    bool operator==(const StripingMatrix&) const = default;

private:
    std::size_t index(int a, int b) const { return static_cast<std::size_t>(a) * n_ + b; }
    int n_ = 0;
    std::vector<int> counts_;
};

// Uniform mesh: each pair gets floor(u / (n - 1)) links; the remainder goes to
// the lexicographically first pair set that fills as many rows as possible.
StripingMatrix canonical_striping(int n_abs, int uplinks_per_ab);

struct Uplink {
    int fiber_id = 0;
    double fiber_m = 0.0;
    std::optional<int> link_id;
};

struct AggregationBlock {
    int id = 0;
    std::string generation;
    int uplink_count = 0;
    std::vector<Uplink> uplinks;

    int assigned() const;
    std::optional<int> first_free_uplink() const;
};

struct Placement {
    int zone = 0;
    int rack = 0;
    int slot = 0;
    bool operator==(const Placement&) const = default;
};

struct PhysicalLayout {
    int zones = 4;
    int racks_per_zone = 8;
    int ocs_per_rack = 8;
    double ups_kw = 60.0;
    double feed_kw = 30.0;

    int max_ocs() const { return zones * racks_per_zone * ocs_per_rack; }
    // Round-robin over zones, then racks within the zone, then slots.
    Placement place(int ocs_index) const;
};

enum class LinkMode { Circulator, DuplexPair };

struct OcsSlot {
    int id = 0;
    Placement placement;
    OcsDevice device;
};

struct LinkRealization {
    int id = 0;
    int ab_a = 0;
    int ab_b = 0;
    int uplink_a = 0;
    int uplink_b = 0;
    int ocs = 0;
    CrossConnect forward;
    // Second cross-connect carrying B -> A in duplex-pair mode.
    std::optional<CrossConnect> reverse;

    bool uses_spare(const OcsDevice& dev) const;
};

struct FabricConfig {
    int n_abs = 4;
    int uplinks_per_ab = 32;
    int ocs_count = 16;
    // One name for every AB, or one per AB.
    std::vector<std::string> generations{"400G-CWDM4"};
    LinkMode mode = LinkMode::Circulator;
    bool uniform_zones = true;
    double fiber_min_m = 50.0;
    double fiber_max_m = 500.0;
    std::uint64_t seed = 1;
    DeviceProfile device;
    GenerationTable generation_table = default_generation_table();
    LinkOptics optics;
    PhysicalLayout layout;

    std::vector<std::string> validate() const;
};

class ResourceBusy : public Error {
public:
    using Error::Error;
};

class InsufficientPorts : public Error {
public:
    using Error::Error;
};

struct UplinkRef {
    int ab = 0;
    int uplink = 0;
};

struct OcsPath {
    int ocs = 0;
    CrossConnect forward;
    std::optional<CrossConnect> reverse;
};

struct ComposedLink {
    int link_id = 0;
    LinkPath path;
};

struct RealizationReport {
    int links = 0;
    int ocs_ports_used = 0;
    int fibers_used = 0;
    std::vector<int> links_per_ocs;
};

struct FailureTarget {
    enum class Kind { Zone, Rack, Ocs, PowerFeed };
    Kind kind = Kind::Ocs;
    int zone = 0;
    int rack = 0;
    int ocs = 0;
    char feed = 'A';

    static FailureTarget of_zone(int z) { return {Kind::Zone, z, 0, 0, 'A'}; }
    static FailureTarget of_rack(int z, int r) { return {Kind::Rack, z, r, 0, 'A'}; }
    static FailureTarget of_ocs(int id) { return {Kind::Ocs, 0, 0, id, 'A'}; }
    static FailureTarget of_feed(int z, char f) { return {Kind::PowerFeed, z, 0, 0, f}; }
};

std::string to_string(const FailureTarget& t);

struct FailureImpact {
    double capacity_lost_fraction = 0.0;
    int links_lost = 0;
    int links_total = 0;
    std::vector<std::pair<int, int>> affected_ab_pairs;
};

struct ZoneReport {
    int zone = 0;
    int ocs_count = 0;
    std::vector<int> ocs_per_rack;
    double power_w = 0.0;
    double worst_case_power_w = 0.0;
};

struct LayoutReport {
    std::vector<ZoneReport> zones;
    std::vector<double> fiber_lengths_m;
    double total_power_w = 0.0;
    double worst_case_power_w = 0.0;
    double feed_budget_w = 0.0;
    double ups_budget_w = 0.0;
};

class Fabric {
public:
    Fabric() = default;

    // Manufactures, calibrates and places OCSes, then realizes canonical striping.
    static Fabric build(const FabricConfig& config);

    const FabricConfig& config() const { return config_; }
    const std::vector<AggregationBlock>& abs() const { return abs_; }
    const std::vector<OcsSlot>& ocses() const { return ocses_; }
    const std::map<int, LinkRealization>& links() const { return links_; }
    const LinkRealization& link(int id) const;
    int n_abs() const { return static_cast<int>(abs_.size()); }
    // Link counts implied by the realized links.
    StripingMatrix striping() const;

    int add_ab(const std::string& generation, int uplinks);

    ComposedLink compose_link(UplinkRef a, UplinkRef b, const OcsPath& path);
    // Picks uplinks, OCS and ports by the diversity rule.
    int add_link(int ab_a, int ab_b);
    void remove_link(int link_id);
    // Re-homes a link on the OCS's spare ports; returns false when none are free.
    bool move_to_spare(int link_id);
    void clear_links();
    RealizationReport realize_striping(const StripingMatrix& striping);
    RealizationReport realization_report() const;

    std::optional<int> choose_ocs(int ab_a, int ab_b) const;
    bool has_free_uplink(int ab) const;

    LinkPath link_path(int link_id) const;
    Negotiated pair_rate(int ab_a, int ab_b) const;
    double link_capacity_gbps(int link_id) const;
    // Per-link rate for every AB pair, in Gb/s.
    std::vector<std::vector<double>> pair_rates() const;
    double released_capacity_gbps() const;

    FailureImpact failure_impact(const FailureTarget& target) const;
    LayoutReport layout_report() const;

    std::uint64_t revision() const { return revision_; }
    void bump_revision() { ++revision_; }
    std::uint64_t fingerprint() const;
    int next_link_id() const { return next_link_id_; }

private:
    std::vector<int> free_ports(const OcsDevice& dev, bool input, int count, bool spare) const;
    int ports_per_link() const { return config_.mode == LinkMode::Circulator ? 1 : 2; }

    FabricConfig config_;
    std::vector<AggregationBlock> abs_;
    std::vector<OcsSlot> ocses_;
    std::map<int, LinkRealization> links_;
    std::map<std::pair<int, int>, std::vector<int>> pair_links_;
    int next_link_id_ = 0;
    std::uint64_t revision_ = 0;
};

}  // namespace ocsfab
