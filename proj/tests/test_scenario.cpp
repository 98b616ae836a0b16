#include <algorithm>
#include <string>

#include <gtest/gtest.h>

#include "ocsfab/report_format.hpp"
#include "ocsfab/scenario.hpp"

namespace {

using namespace ocsfab;

const std::string kScenarioDir = OCSFAB_SCENARIO_DIR;

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

Json small_doc() {
    return Json::parse(R"({
      "seed": 5,
      "fabric": {"n_abs": 4, "uplinks": 32, "ocs_count": 16, "generations": "400G-CWDM4"},
      "demand_matrices": {
        "hot": {"unit": "gbps", "n": 4,
                "data": [0, 5000, 100, 100, 5000, 0, 100, 100, 100, 100, 0, 5000, 100, 100, 5000, 0]}
      },
      "actions": [{"type": "build"}]
    })");
}

ScenarioConfig parse_ok(const Json& doc) {
    auto r = parse_config(doc);
    EXPECT_TRUE(r.ok()) << (r.violations.empty() ? "" : r.violations.front());
    return *r.config;
}

TEST(Parse, MinimalScenario) {
    const auto r = parse_config_file(kScenarioDir + "/minimal.json");
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.config->seed, 1u);
    EXPECT_EQ(r.config->actions.size(), 2u);
    EXPECT_EQ(action_type(r.config->actions[0]), "build");
}

TEST(Parse, InvalidScenarioListsEveryProblem) {
    const auto r = parse_config_file(kScenarioDir + "/invalid.json");
    EXPECT_FALSE(r.ok());
    EXPECT_GE(r.violations.size(), 5u);
    EXPECT_TRUE(mentions(r.violations, "seed required"));
    EXPECT_TRUE(mentions(r.violations, "800G-FUTURE"));
    EXPECT_TRUE(mentions(r.violations, "teleport"));
}

TEST(Parse, MissingSeed) {
    auto doc = small_doc();
    doc.erase("seed");
    EXPECT_TRUE(mentions(parse_config(doc).violations, "seed required"));
}

TEST(Parse, NegativeDemandCellNamed) {
    auto doc = small_doc();
    doc["demand_matrices"]["hot"]["data"][6] = -4;
    const auto r = parse_config(doc);
    EXPECT_FALSE(r.ok());
    EXPECT_TRUE(mentions(r.violations, "[1][2]"));
}

TEST(Parse, DemandShapeAndReferences) {
    auto doc = small_doc();
    doc["demand_matrices"]["hot"]["data"].erase(0);
    doc["actions"].push_back({{"type", "optimize"}, {"demand", "cold"}});
    const auto r = parse_config(doc);
    EXPECT_TRUE(mentions(r.violations, "entries"));
    EXPECT_TRUE(mentions(r.violations, "'cold' is not defined"));
}

TEST(Parse, UnknownFieldsAndBadJson) {
    auto doc = small_doc();
    doc["fabric"]["colour"] = "blue";
    EXPECT_TRUE(mentions(parse_config(doc).violations, "colour"));
    EXPECT_FALSE(parse_config_text("{not json").ok());
    EXPECT_FALSE(parse_config_file(kScenarioDir + "/does-not-exist.json").ok());
}

TEST(Parse, ActionOrderAndRanges) {
    auto doc = small_doc();
    doc["actions"] = Json::array({{{"type", "report"}},
                                  {{"type", "build"}},
                                  {{"type", "fail"}, {"target", {{"kind", "zone"}, {"zone", 9}}}},
                                  {{"type", "expand"}, {"new_abs", 200}}});
    const auto r = parse_config(doc);
    EXPECT_FALSE(r.ok());
    EXPECT_GE(r.violations.size(), 3u);
    EXPECT_TRUE(mentions(r.violations, "zone 9"));
}

TEST(Parse, ConfigHashTracksContent) {
    const auto a = parse_ok(small_doc());
    auto doc = small_doc();
    doc["seed"] = 6;
    EXPECT_NE(a.config_hash, parse_ok(doc).config_hash);
    EXPECT_EQ(a.config_hash, parse_ok(small_doc()).config_hash);
}

TEST(Run, BuildThenExpandReachesCanonical) {
    auto doc = small_doc();
    doc["actions"].push_back({{"type", "expand"}, {"new_abs", 4}, {"drain_limit", 0.125}});
    doc["actions"].push_back({{"type", "report"}});
    const auto report = run_scenario(parse_ok(doc));
    ASSERT_FALSE(report.aborted) << report.abort_cause;
    const auto& expand = report.actions[1].result;
    EXPECT_EQ(expand["abs_after"], 8);
    EXPECT_TRUE(expand["floor_respected"].get<bool>());
    EXPECT_TRUE(expand["matches_target"].get<bool>());
    EXPECT_EQ(striping_from_json(report.actions[2].result["striping"]), canonical_striping(8, 32));
}

TEST(Run, OptimizeAppliesStriping) {
    auto doc = small_doc();
    doc["actions"].push_back({{"type", "optimize"}, {"demand", "hot"}});
    doc["actions"].push_back({{"type", "report"}});
    const auto report = run_scenario(parse_ok(doc));
    ASSERT_FALSE(report.aborted) << report.abort_cause;
    const auto& opt = report.actions[1].result;
    EXPECT_GE(number_from_json(opt["alpha_optimized"]), number_from_json(opt["alpha_canonical"]));
    EXPECT_EQ(report.actions[2].result["striping"], opt["striping"]);
}

TEST(Run, ReportHasHistogramWithinLimit) {
    auto doc = small_doc();
    doc["actions"].push_back({{"type", "report"}});
    const auto report = run_scenario(parse_ok(doc));
    const auto& h = report.actions[1].result["insertion_loss_histogram"];
    EXPECT_LE(number_from_json(h["max_db"]), 2.0);
    long long total = 0;
    for (const auto& c : h["counts"]) total += c.get<long long>();
    EXPECT_EQ(total, h["entries"].get<long long>());
    EXPECT_EQ(total, 16LL * 136 * 136);
    ASSERT_EQ(report.checks.size(), 3u);
    for (const auto& c : report.checks) EXPECT_TRUE(c.pass) << c.name;
}

TEST(Run, DeterministicAndRoundTrips) {
    const auto cfg = parse_config_file(kScenarioDir + "/minimal.json").config.value();
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(cfg);
    EXPECT_EQ(emit_report(a, ReportFormat::Json), emit_report(b, ReportFormat::Json));
    const auto back = RunReport::from_json(Json::parse(emit_report(a, ReportFormat::Json)));
    EXPECT_EQ(back, a);
}

TEST(Run, SeedOverrideChangesFabric) {
    auto cfg = parse_config_file(kScenarioDir + "/minimal.json").config.value();
    const auto a = run_scenario(cfg);
    cfg.override_seed(99);
    const auto b = run_scenario(cfg);
    EXPECT_EQ(b.seed, 99u);
    EXPECT_NE(a.actions[1].result["min_link_margin_db"], b.actions[1].result["min_link_margin_db"]);
}

TEST(Run, ActionBeforeBuildAborts) {
    ScenarioConfig cfg;
    cfg.seed = 1;
    cfg.actions = {ReportAction{}, BuildAction{}};
    const auto report = run_scenario(cfg);
    EXPECT_TRUE(report.aborted);
    EXPECT_EQ(report.aborted_action, 0);
    EXPECT_TRUE(report.actions.empty());
    const auto text = emit_report(report, ReportFormat::Text);
    EXPECT_NE(text.find("ABORTED at action 0"), std::string::npos);
}

TEST(Run, RuntimeCapacityFailureAborts) {
    ScenarioConfig cfg = parse_ok(small_doc());
    cfg.actions.push_back(ExpandAction{.new_abs = 200});
    const auto report = run_scenario(cfg);
    EXPECT_TRUE(report.aborted);
    EXPECT_EQ(report.aborted_action, 1);
    ASSERT_EQ(report.actions.size(), 1u);
    EXPECT_FALSE(report.fabric.is_null());
}

TEST(Emit, TextHasCheckLines) {
    const auto cfg = parse_config_file(kScenarioDir + "/minimal.json").config.value();
    const auto text = emit_report(run_scenario(cfg), ReportFormat::Text);
    EXPECT_NE(text.find("[0] build:"), std::string::npos);
    EXPECT_NE(text.find("PASS insertion_loss_max_db"), std::string::npos);
    EXPECT_NE(text.find("PASS return_loss_max_db"), std::string::npos);
    EXPECT_NE(text.find("PASS power_worst_case_w"), std::string::npos);
}

TEST(ReportFormat, SignificantDigits) {
    EXPECT_EQ(round_sig(1.23456789), 1.23457);
    EXPECT_EQ(round_sig(-0.000123456789), -0.000123457);
    EXPECT_EQ(round_sig(0.0), 0.0);
    EXPECT_EQ(number_json(std::numeric_limits<double>::infinity()), "inf");
    EXPECT_TRUE(std::isinf(number_from_json(Json("inf"))));
    EXPECT_TRUE(std::isnan(number_from_json(Json("nan"))));
}

TEST(ReportFormat, StripingRoundTrip) {
    const auto s = canonical_striping(6, 17);
    EXPECT_EQ(striping_from_json(striping_to_json(s)), s);
}

TEST(ReportFormat, Fnv1aKnownValue) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

}  // namespace
