#include <cmath>

#include <gtest/gtest.h>

#include "ocsfab/optical_link.hpp"

namespace {

using namespace ocsfab;

TransceiverGeneration zero_latency(const std::string& name) {
    auto g = default_generation_table().at(name);
    g.latency_ns = 0.0;
    return g;
}

OcsTraversal traversal() { return {.ocs_id = 0, .in_port = 1, .out_port = 2, .insertion_loss_db = 1.5,
                                   .rl_in_db = -46.0, .rl_out_db = -46.0, .freespace_m = 0.1}; }

LinkPath standard_path(const std::string& gen = "400G-CWDM4") {
    const auto g = default_generation_table().at(gen);
    return build_link_path({g, g, LinkOptics{}, 100.0, 100.0, traversal()});
}

// Appends one lossy connector so the budget lands on a chosen margin.
LinkPath with_margin(double target_db) {
    auto path = standard_path();
    const auto rate = negotiate_interop(path.gen_a, path.gen_b);
    const double base = link_budget(path, rate).margin_db;
    path.elements.push_back({ElementKind::Connector, "impairment", base - target_db, 0.0, 0.0});
    return path;
}

TEST(Circulator, CyclesPorts) {
    EXPECT_EQ(circulate(1), 2);
    EXPECT_EQ(circulate(2), 3);
    EXPECT_EQ(circulate(3), 1);
    EXPECT_THROW(circulate(0), InvalidPort);
    EXPECT_THROW(circulate(4), InvalidPort);
}

TEST(Circulator, ValidateFlagsWeakDirectivity) {
    Circulator c;
    EXPECT_TRUE(c.validate().empty());
    c.directivity_db = 20.0;
    EXPECT_EQ(c.validate().size(), 1u);
}

TEST(Delay, FiberOnly) {
    const auto g = zero_latency("400G-CWDM4");
    const auto path = build_link_path({g, g, LinkOptics{}, 100.0, 100.0, std::nullopt});
    EXPECT_NEAR(propagation_delay_ns(path), 1000.0, 1e-9);
}

TEST(Delay, FiberPlusFreeSpace) {
    const auto g = zero_latency("400G-CWDM4");
    auto t = traversal();
    t.freespace_m = 1.0;
    const auto path = build_link_path({g, g, LinkOptics{}, 50.0, 50.0, t});
    EXPECT_NEAR(propagation_delay_ns(path), 503.3, 1e-9);
}

TEST(Delay, IncludesTransceivers) {
    const auto g = default_generation_table().at("400G-CWDM4");
    const auto path = build_link_path({g, g, LinkOptics{}, 0.0, 0.0, std::nullopt});
    EXPECT_NEAR(propagation_delay_ns(path), 2.0 * g.latency_ns, 1e-9);
}

TEST(LinkPath, RejectsLongFiber) {
    const auto g = default_generation_table().at("400G-CWDM4");
    EXPECT_THROW(build_link_path({g, g, LinkOptics{}, 600.0, 500.0, std::nullopt}), PathInvalid);
    EXPECT_THROW(build_link_path({g, g, LinkOptics{}, -1.0, 0.0, std::nullopt}), PathInvalid);
}

TEST(LinkPath, MinimalLinkHasReflections) {
    const auto path = standard_path();
    EXPECT_GE(path.reflections.size(), 3u);
    EXPECT_EQ(path.connector_count(), 2);
}

TEST(LinkPath, PatchPanelsAddConnectors) {
    const auto g = default_generation_table().at("400G-CWDM4");
    LinkOptics o;
    o.patch_panels = 2;
    const auto path = build_link_path({g, g, o, 100.0, 100.0, traversal()});
    EXPECT_EQ(path.connector_count(), 6);
}

TEST(LinkPath, ReversedIsInvolution) {
    const auto path = standard_path();
    const auto back = path.reversed().reversed();
    ASSERT_EQ(back.elements.size(), path.elements.size());
    for (std::size_t i = 0; i < path.elements.size(); ++i) EXPECT_EQ(back.elements[i].label, path.elements[i].label);
    ASSERT_EQ(back.reflections.size(), path.reflections.size());
    for (std::size_t i = 0; i < path.reflections.size(); ++i) {
        EXPECT_EQ(back.reflections[i].location, path.reflections[i].location);
    }
}

TEST(Reflections, TwoSourcesLosslessSpan) {
    LinkPath path;
    path.elements = {{ElementKind::Connector, "a", 0.0, 0.0, 0.0}, {ElementKind::Connector, "b", 0.0, 0.0, 0.0}};
    path.reflections = {{0, -38.0, ReflectionKind::Reflection}, {1, -38.0, ReflectionKind::Reflection}};
    EXPECT_NEAR(aggregate_reflections(path), std::pow(10.0, -7.6), 1e-15);
}

TEST(Reflections, SpanLossAttenuatesTwice) {
    LinkPath path;
    path.elements = {{ElementKind::Connector, "a", 0.0, 0.0, 0.0},
                     {ElementKind::Fiber, "f", 3.0, 0.0, 0.0},
                     {ElementKind::Connector, "b", 0.0, 0.0, 0.0}};
    path.reflections = {{0, -38.0, ReflectionKind::Reflection}, {2, -38.0, ReflectionKind::Reflection}};
    EXPECT_NEAR(aggregate_reflections(path), std::pow(10.0, -8.2), 1e-16);
}

TEST(Reflections, NonePresentGivesZero) {
    LinkPath path;
    path.elements = {{ElementKind::Fiber, "f", 0.1, 200.0, 0.0}};
    EXPECT_EQ(aggregate_reflections(path), 0.0);
}

TEST(Reflections, WorseReturnLossRaisesEpsilon) {
    const auto g = default_generation_table().at("400G-CWDM4");
    LinkOptics o;
    const double good = aggregate_reflections(build_link_path({g, g, o, 100.0, 100.0, traversal()}));
    o.connector.return_loss_db = -35.0;
    const double bad = aggregate_reflections(build_link_path({g, g, o, 100.0, 100.0, traversal()}));
    EXPECT_GT(bad, good);
}

TEST(MpiPenalty, ZeroEpsilonIsFree) {
    EXPECT_EQ(mpi_penalty_db(0.0, Modulation::Nrz), 0.0);
    EXPECT_EQ(mpi_penalty_db(0.0, Modulation::Pam4), 0.0);
}

TEST(MpiPenalty, Pam4ClosedFormExample) {
    EXPECT_NEAR(mpi_penalty_db(1e-4, Modulation::Pam4), -10.0 * std::log10(1.0 - 0.06), 1e-12);
    EXPECT_NEAR(mpi_penalty_db(1e-4, Modulation::Pam4), 0.27, 0.01);
}

TEST(MpiPenalty, MonotoneAndPam4Worse) {
    double prev_nrz = 0.0;
    double prev_pam4 = 0.0;
    for (double eps = 1e-7; eps < 1e-2; eps *= 1.7) {
        const double nrz = mpi_penalty_db(eps, Modulation::Nrz);
        const double pam4 = mpi_penalty_db(eps, Modulation::Pam4);
        EXPECT_GT(nrz, prev_nrz);
        EXPECT_GT(pam4, prev_pam4);
        EXPECT_GT(pam4, nrz);
        prev_nrz = nrz;
        prev_pam4 = pam4;
    }
}

TEST(MpiPenalty, ClosedEyeThrows) {
    EXPECT_THROW(mpi_penalty_db(0.1, Modulation::Pam4), PenaltyUnbounded);
    EXPECT_THROW(mpi_penalty_db(0.25, Modulation::Nrz), PenaltyUnbounded);
    EXPECT_THROW(mpi_penalty_db(-1e-6, Modulation::Nrz), std::invalid_argument);
}

TEST(MpiOracle, AgreesWithClosedForm) {
    for (auto mod : {Modulation::Nrz, Modulation::Pam4}) {
        for (double eps : {1e-5, 1e-4, 1e-3}) {
            const auto r = mpi_oracle(eps, mod, 200'000, 5);
            EXPECT_NEAR(r.penalty_p999_db, mpi_penalty_db(eps, mod), 0.5) << to_string(mod) << " " << eps;
        }
    }
}

TEST(MpiOracle, ParallelMatchesSerial) {
    const auto par = mpi_oracle(1e-4, Modulation::Pam4, 50'000, 9, true);
    const auto ser = mpi_oracle(1e-4, Modulation::Pam4, 50'000, 9, false);
    EXPECT_EQ(par.penalty_p999_db, ser.penalty_p999_db);
}

TEST(MpiOracle, ZeroEpsilonIsZero) {
    EXPECT_EQ(mpi_oracle(0.0, Modulation::Nrz, 1000, 1).penalty_p999_db, 0.0);
}

TEST(Interop, DefaultTableIsValid) { EXPECT_TRUE(default_generation_table().validate().empty()); }

TEST(Interop, PicksHighestCommonRate) {
    const auto t = default_generation_table();
    const auto n = negotiate_interop(t.at("400G-CWDM4"), t.at("100G-CWDM4"));
    ASSERT_TRUE(n.compatible);
    EXPECT_EQ(n.rate_gbps, 100);
    EXPECT_EQ(n.modulation, Modulation::Nrz);
    EXPECT_EQ(n.fec_ber_threshold, 1e-12);

    const auto same = negotiate_interop(t.at("400G-CWDM4"), t.at("400G-CWDM4"));
    EXPECT_EQ(same.rate_gbps, 400);
    EXPECT_EQ(same.modulation, Modulation::Pam4);

    EXPECT_EQ(negotiate_interop(t.at("40G-CWDM4"), t.at("200G-CWDM4")).rate_gbps, 40);
}

TEST(Interop, Commutative) {
    const auto t = default_generation_table();
    for (const auto& a : t.all()) {
        for (const auto& b : t.all()) EXPECT_EQ(negotiate_interop(a, b), negotiate_interop(b, a));
    }
}

TEST(Interop, GridMismatchIsIncompatible) {
    const auto t = default_generation_table();
    auto odd = t.at("100G-CWDM4");
    odd.grid_nm = {1295.0, 1300.0, 1305.0, 1310.0};
    const auto n = negotiate_interop(t.at("400G-CWDM4"), odd);
    EXPECT_FALSE(n.compatible);
    EXPECT_NE(n.reason.find("grid"), std::string::npos);
}

TEST(Interop, NarrowReceiverWindowIsIncompatible) {
    const auto t = default_generation_table();
    auto narrow = t.at("400G-CWDM4");
    narrow.rx_sensitivity_dbm[100] = -8.0;
    EXPECT_FALSE(negotiate_interop(narrow, t.at("100G-CWDM4")).compatible);
    EXPECT_FALSE(GenerationTable({t.at("100G-CWDM4"), narrow}).validate().empty());
}

TEST(Budget, ExtraLossCostsEqualMargin) {
    auto path = standard_path();
    const auto rate = negotiate_interop(path.gen_a, path.gen_b);
    const double before = link_budget(path, rate).margin_db;
    path.elements.push_back({ElementKind::Connector, "extra", 1.0, 0.0, 0.0});
    EXPECT_NEAR(link_budget(path, rate).margin_db, before - 1.0, 1e-12);
}

TEST(Budget, SymmetricForMatchedGenerations) {
    const auto path = standard_path();
    const auto rate = negotiate_interop(path.gen_a, path.gen_b);
    EXPECT_NEAR(link_budget(path, rate).margin_db, link_budget(path.reversed(), rate).margin_db, 1e-12);
}

TEST(Budget, OverloadDetected) {
    auto g = default_generation_table().at("400G-CWDM4");
    g.rx_overload_dbm = 0.0;
    const auto path = build_link_path({g, g, LinkOptics{}, 0.0, 0.0, std::nullopt});
    EXPECT_THROW(link_budget(path, negotiate_interop(g, g)), OverloadViolation);
}

TEST(Ber, RoundTripsThroughQ) {
    for (double ber : {1e-12, 1e-6, 2.4e-4, 1e-2}) EXPECT_NEAR(ber_from_q(q_from_ber(ber)) / ber, 1.0, 1e-9);
    EXPECT_NEAR(ber_from_margin(0.0, 2.4e-4), 2.4e-4, 1e-12);
    EXPECT_LT(ber_from_margin(1.0, 2.4e-4), 2.4e-4);
    EXPECT_GT(ber_from_margin(-1.0, 2.4e-4), 2.4e-4);
}

TEST(Qualification, PositiveMarginPasses) {
    const auto path = with_margin(3.0);
    const auto q = qualify_link(path, negotiate_interop(path.gen_a, path.gen_b), {}, 1);
    EXPECT_TRUE(q.audit_pass);
    EXPECT_TRUE(q.bert_pass);
    EXPECT_NEAR(q.margin_db, 3.0, 1e-9);
}

TEST(Qualification, NegativeMarginFailsBert) {
    const auto path = with_margin(-1.0);
    const auto q = qualify_link(path, negotiate_interop(path.gen_a, path.gen_b), {}, 1);
    EXPECT_TRUE(q.audit_pass);
    EXPECT_TRUE(q.bert_run);
    EXPECT_FALSE(q.bert_pass);
}

TEST(Qualification, IncompletePathFailsAudit) {
    const auto path = standard_path();
    const auto rate = negotiate_interop(path.gen_a, path.gen_b);
    for (PhysicalState s : {PhysicalState{false, true}, PhysicalState{true, false}}) {
        const auto q = qualify_link(path, rate, s, 1);
        EXPECT_FALSE(q.audit_pass);
        EXPECT_FALSE(q.bert_run);
        EXPECT_FALSE(q.bert_pass);
    }
}

TEST(Qualification, BertPassImpliesAuditPass) {
    for (double margin : {-2.0, 0.5, 3.0}) {
        for (bool xc : {false, true}) {
            for (std::uint64_t seed = 0; seed < 20; ++seed) {
                const auto path = with_margin(margin);
                const auto q = qualify_link(path, negotiate_interop(path.gen_a, path.gen_b), {xc, true}, seed, 0.3);
                if (q.bert_pass) EXPECT_TRUE(q.audit_pass);
            }
        }
    }
}

TEST(Qualification, FlakeIsDeterministicPerSeed) {
    const auto path = with_margin(3.0);
    const auto rate = negotiate_interop(path.gen_a, path.gen_b);
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto a = qualify_link(path, rate, {}, seed, 0.5);
        const auto b = qualify_link(path, rate, {}, seed, 0.5);
        EXPECT_EQ(a.bert_pass, b.bert_pass);
        failures += a.bert_pass ? 0 : 1;
    }
    EXPECT_GT(failures, 50);
    EXPECT_LT(failures, 150);
}

}  // namespace
