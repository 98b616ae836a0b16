#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ocsfab/errors.hpp"
#include "ocsfab/fabric.hpp"

namespace ocsfab {

inline constexpr double kDefaultDrainLimit = 0.125;
inline constexpr int kDefaultRetries = 3;
inline constexpr double kDefaultBertSeconds = 60.0;

struct NewAbSpec {
    std::string generation;
    // 0 means the fabric's uplinks per AB.
    int uplinks = 0;
};

enum class LinkState {
    Live,
    Pending,
    Draining,
    Reconfiguring,
    Qualifying,
    SpareReconfiguring,
    SpareQualifying,
    Released,
    Failed,
    Removed,
};

std::string to_string(LinkState s);
std::optional<LinkState> parse_link_state(const std::string& s);
bool link_transition_allowed(LinkState from, LinkState to);
bool step_transition_allowed(LinkState from, LinkState to);

struct OcsOp {
    enum class Kind { Disconnect, Connect };
    Kind kind = Kind::Connect;
    int ocs = 0;
    CrossConnect xc;
    int link_id = 0;
};

struct PlannedLink {
    int link_id = 0;
    int ab_a = 0;
    int ab_b = 0;
    int uplink_a = 0;
    int uplink_b = 0;
    OcsPath path;
};

struct RestripeStep {
    std::vector<int> links_to_drain;
    std::vector<OcsOp> ocs_ops;
    std::vector<PlannedLink> links_to_qualify;
};

struct RestripePlan {
    std::vector<NewAbSpec> new_abs;
    double drain_limit = kDefaultDrainLimit;
    StripingMatrix source;
    StripingMatrix target;
    std::uint64_t source_revision = 0;
    std::uint64_t source_fingerprint = 0;
    double source_capacity_gbps = 0.0;
    std::vector<RestripeStep> steps;

    bool empty() const { return steps.empty() && new_abs.empty(); }
    double capacity_floor_gbps() const { return (1.0 - drain_limit) * source_capacity_gbps; }
};

// Full re-stripe to canonical(N + k), or to `target` when supplied.
RestripePlan plan_expansion(const Fabric& fabric, const std::vector<NewAbSpec>& new_abs, double drain_limit,
                            const std::optional<StripingMatrix>& target = std::nullopt);

struct PlanViolation {
    int step = 0;
    std::string kind;
    std::string detail;
};

std::vector<PlanViolation> validate_plan(const Fabric& fabric, const RestripePlan& plan);

struct ExecuteOptions {
    double flake_probability = 0.0;
    int retries = kDefaultRetries;
    double bert_seconds = kDefaultBertSeconds;
    // Extra loss injected on specific planned links, keyed by link id.
    std::map<int, double> impairment_db;
};

struct Event {
    double t_virtual_s = 0.0;
    int step = 0;
    std::optional<int> link_id;
    LinkState from = LinkState::Pending;
    LinkState to = LinkState::Pending;
    std::string detail;
    // Released capacity right after the event.
    double released_gbps = 0.0;
};

struct EventLog {
    std::vector<Event> events;
    double capacity_floor_gbps = 0.0;
    bool halted = false;
    std::vector<int> released_links;
    std::vector<int> failed_links;
    std::map<int, int> qualification_attempts;
    std::map<int, int> spare_moves_per_ocs;

    std::string to_json_lines() const;
    // Events whose released capacity dips below the floor.
    std::vector<std::size_t> floor_violations() const;
};

class PlanStale : public Error {
public:
    using Error::Error;
};

EventLog execute_plan(Fabric& fabric, const RestripePlan& plan, std::uint64_t seed, const ExecuteOptions& options = {});

// Problems found replaying the log against the link and step state machines.
std::vector<std::string> check_monotone(const EventLog& log);

}  // namespace ocsfab
