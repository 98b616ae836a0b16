#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ocsfab/errors.hpp"
#include "ocsfab/expansion.hpp"
#include "ocsfab/fabric.hpp"
#include "ocsfab/report_format.hpp"
#include "ocsfab/topo_engineering.hpp"

namespace ocsfab {

struct BuildAction {};

struct OptimizeAction {
    std::string demand;
    RoutingPolicy policy = RoutingPolicy::Wcmp;
    bool apply = true;
};

struct ExpandAction {
    int new_abs = 0;
    double drain_limit = kDefaultDrainLimit;
    // Empty means the first generation of the existing fabric.
    std::vector<std::string> generations;
    double flake = 0.0;
    int retries = kDefaultRetries;
    double bert_seconds = kDefaultBertSeconds;
};

struct FailAction {
    FailureTarget target;
};

struct ReportAction {};

using Action = std::variant<BuildAction, OptimizeAction, ExpandAction, FailAction, ReportAction>;
std::string action_type(const Action& a);

struct ScenarioConfig {
    std::uint64_t seed = 0;
    FabricConfig fabric;
    std::map<std::string, DemandMatrix> demand_matrices;
    std::vector<Action> actions;
    // FNV-1a of the compact source document.
    std::uint64_t config_hash = 0;

    void override_seed(std::uint64_t s) {
        seed = s;
        fabric.seed = s;
    }
};

struct ParseResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> violations;

    bool ok() const { return config.has_value(); }
};

// Collects every violation rather than stopping at the first.
ParseResult parse_config(const Json& document);
ParseResult parse_config_text(const std::string& text);
ParseResult parse_config_file(const std::string& path);

struct LimitCheck {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    bool pass = false;

    bool operator==(const LimitCheck&) const = default;
};

struct ActionOutput {
    int index = 0;
    std::string type;
    Json result;

    bool operator==(const ActionOutput&) const = default;
};

inline constexpr const char* kReportSchema = "ocsfab.report/1";

struct RunReport {
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    bool aborted = false;
    std::optional<int> aborted_action;
    std::string abort_cause;
    std::vector<ActionOutput> actions;
    std::vector<LimitCheck> checks;
    Json fabric;

    Json to_json() const;
    static RunReport from_json(const Json& j);

    bool operator==(const RunReport&) const = default;
};

class Aborted : public Error {
public:
    Aborted(int action_index, const std::string& cause);
    int action_index;
};

// Runs every action against one fabric; a failing action ends the run and
// marks the report aborted.
RunReport run_scenario(const ScenarioConfig& config);

// Insertion loss, return loss and worst-case power against the device limits.
std::vector<LimitCheck> limit_checks(const Fabric& fabric);

enum class ReportFormat { Json, Text };
std::string emit_report(const RunReport& report, ReportFormat format);

}  // namespace ocsfab
