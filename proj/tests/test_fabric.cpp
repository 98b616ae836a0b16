#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "ocsfab/fabric.hpp"

namespace {

using namespace ocsfab;

FabricConfig small_config(LinkMode mode = LinkMode::Circulator) {
    FabricConfig c;
    c.n_abs = 4;
    c.uplinks_per_ab = 32;
    c.ocs_count = 16;
    c.mode = mode;
    c.seed = 11;
    return c;
}

const Fabric& shared_fabric() {
    static const Fabric f = Fabric::build(small_config());
    return f;
}

TEST(CanonicalStriping, RemainderFillsDisjointPairs) {
    const auto s = canonical_striping(4, 13);
    EXPECT_EQ(s.at(0, 1), 5);
    EXPECT_EQ(s.at(2, 3), 5);
    EXPECT_EQ(s.at(0, 2), 4);
    EXPECT_EQ(s.at(1, 3), 4);
    for (int a = 0; a < 4; ++a) EXPECT_EQ(s.row_sum(a), 13);
}

TEST(CanonicalStriping, FourByThirtyTwo) {
    const auto s = canonical_striping(4, 32);
    EXPECT_EQ(s.total_links(), 64);
    for (int a = 0; a < 4; ++a) EXPECT_EQ(s.row_sum(a), 32);
}

TEST(CanonicalStriping, SymmetricZeroDiagonalBalanced) {
    for (int n = 2; n <= 9; ++n) {
        for (int u = 0; u <= 40; u += 3) {
            const auto s = canonical_striping(n, u);
            int lo = 1 << 30;
            int hi = 0;
            for (int a = 0; a < n; ++a) {
                EXPECT_EQ(s.at(a, a), 0);
                EXPECT_LE(s.row_sum(a), u);
                for (int b = 0; b < n; ++b) {
                    EXPECT_EQ(s.at(a, b), s.at(b, a));
                    if (a != b) {
                        lo = std::min(lo, s.at(a, b));
                        hi = std::max(hi, s.at(a, b));
                    }
                }
            }
            EXPECT_LE(hi - lo, 1) << n << "x" << u;
            EXPECT_EQ(s.total_links(), n * u / 2) << n << "x" << u;
        }
    }
}

TEST(CanonicalStriping, RejectsBadInput) {
    EXPECT_THROW(canonical_striping(0, 4), ConfigInvalid);
    EXPECT_THROW(canonical_striping(3, -1), ConfigInvalid);
}

TEST(Layout, RoundRobinOverZones) {
    PhysicalLayout layout;
    ASSERT_EQ(layout.max_ocs(), 256);
    std::vector<int> per_zone(4, 0);
    std::vector<std::vector<int>> per_rack(4, std::vector<int>(8, 0));
    std::set<std::tuple<int, int, int>> seen;
    for (int i = 0; i < 256; ++i) {
        const auto p = layout.place(i);
        ++per_zone[p.zone];
        ++per_rack[p.zone][p.rack];
        EXPECT_TRUE(seen.emplace(p.zone, p.rack, p.slot).second);
    }
    for (int z = 0; z < 4; ++z) {
        EXPECT_EQ(per_zone[z], 64);
        for (int r = 0; r < 8; ++r) EXPECT_EQ(per_rack[z][r], 8);
    }
    EXPECT_EQ(layout.place(0).zone, 0);
    EXPECT_EQ(layout.place(1).zone, 1);
}

TEST(Fabric, BuildRealizesCanonical) {
    const auto& f = shared_fabric();
    EXPECT_EQ(f.striping(), canonical_striping(4, 32));
    const auto r = f.realization_report();
    EXPECT_EQ(r.links, 64);
    EXPECT_EQ(r.ocs_ports_used, 128);
    EXPECT_EQ(r.fibers_used, 128);
}

TEST(Fabric, LinksSpreadEvenlyAcrossOcses) {
    const auto& f = shared_fabric();
    const auto r = f.realization_report();
    const auto [lo, hi] = std::minmax_element(r.links_per_ocs.begin(), r.links_per_ocs.end());
    EXPECT_LE(*hi - *lo, 1);
    std::map<std::pair<int, int>, std::vector<int>> pair_on_ocs;
    for (const auto& [id, l] : f.links()) {
        auto& v = pair_on_ocs[{l.ab_a, l.ab_b}];
        v.resize(f.ocses().size(), 0);
        ++v[static_cast<std::size_t>(l.ocs)];
    }
    for (const auto& [pair, v] : pair_on_ocs) {
        const auto [plo, phi] = std::minmax_element(v.begin(), v.end());
        EXPECT_LE(*phi - *plo, 1);
    }
}

TEST(Fabric, NoSparePortsUsedAtBuild) {
    const auto& f = shared_fabric();
    for (const auto& [id, l] : f.links()) EXPECT_FALSE(l.uses_spare(f.ocses()[l.ocs].device));
}

TEST(Fabric, CirculatorHalvesPortsAndFibers) {
    const auto duplex = Fabric::build(small_config(LinkMode::DuplexPair));
    const auto c = shared_fabric().realization_report();
    const auto d = duplex.realization_report();
    EXPECT_EQ(c.links, d.links);
    EXPECT_EQ(2 * c.ocs_ports_used, d.ocs_ports_used);
    EXPECT_EQ(2 * c.fibers_used, d.fibers_used);
}

TEST(Fabric, ZoneFailureLosesQuarter) {
    const auto& f = shared_fabric();
    for (int z = 0; z < 4; ++z) {
        const auto impact = f.failure_impact(FailureTarget::of_zone(z));
        EXPECT_NEAR(impact.links_lost, 16, 1);
        EXPECT_NEAR(impact.capacity_lost_fraction, 0.25, 1.0 / 64.0);
    }
}

TEST(Fabric, SingleFeedLossIsHarmless) {
    const auto& f = shared_fabric();
    for (int z = 0; z < 4; ++z) {
        for (char feed : {'A', 'B'}) EXPECT_EQ(f.failure_impact(FailureTarget::of_feed(z, feed)).links_lost, 0);
    }
}

TEST(Fabric, SingleOcsFailure) {
    const auto& f = shared_fabric();
    const auto impact = f.failure_impact(FailureTarget::of_ocs(3));
    EXPECT_EQ(impact.links_lost, f.realization_report().links_per_ocs[3]);
}

TEST(Fabric, ComposeRejectsBusyResources) {
    auto f = shared_fabric();
    const auto& l = f.links().begin()->second;
    EXPECT_THROW(f.compose_link({l.ab_a, l.uplink_a}, {l.ab_b, l.uplink_b}, {l.ocs, {1, 1}, std::nullopt}),
                 ResourceBusy);
}

TEST(Fabric, AddLinkFailsWithoutUplinks) {
    auto f = shared_fabric();
    EXPECT_FALSE(f.has_free_uplink(0));
    EXPECT_THROW(f.add_link(0, 1), InsufficientPorts);
}

TEST(Fabric, RemoveThenAddRestoresCounts) {
    auto f = shared_fabric();
    const auto before = f.striping();
    const int id = f.links().begin()->first;
    const auto l = f.link(id);
    const auto rev = f.revision();
    f.remove_link(id);
    EXPECT_GT(f.revision(), rev);
    EXPECT_EQ(f.striping().at(l.ab_a, l.ab_b), before.at(l.ab_a, l.ab_b) - 1);
    EXPECT_TRUE(f.has_free_uplink(l.ab_a));
    const int fresh = f.add_link(l.ab_a, l.ab_b);
    EXPECT_NE(fresh, id);
    EXPECT_EQ(f.striping(), before);
}

TEST(Fabric, MoveToSpareKeepsLink) {
    auto f = shared_fabric();
    const int id = f.links().begin()->first;
    const auto before = f.link(id);
    ASSERT_TRUE(f.move_to_spare(id));
    const auto& after = f.link(id);
    EXPECT_EQ(after.ocs, before.ocs);
    EXPECT_EQ(after.ab_a, before.ab_a);
    EXPECT_TRUE(after.uses_spare(f.ocses()[after.ocs].device));
    EXPECT_TRUE(f.ocses()[before.ocs].device.in_free(before.forward.in_port));
}

TEST(Fabric, SparePortsRunOut) {
    auto f = shared_fabric();
    const int ocs = 0;
    std::vector<int> ids;
    for (const auto& [id, l] : f.links()) {
        if (l.ocs == ocs) ids.push_back(id);
    }
    const int spares = f.ocses()[ocs].device.spare_ports();
    int moved = 0;
    for (int id : ids) moved += f.move_to_spare(id) ? 1 : 0;
    EXPECT_EQ(moved, std::min<int>(spares, static_cast<int>(ids.size())));
}

TEST(Fabric, LinkPathsQualify) {
    const auto& f = shared_fabric();
    for (const auto& [id, l] : f.links()) {
        const auto q = qualify_link(f.link_path(id), f.pair_rate(l.ab_a, l.ab_b), {}, 1);
        EXPECT_TRUE(q.bert_pass) << "link " << id << " margin " << q.margin_db;
    }
}

TEST(Fabric, FiberWithinBounds) {
    const auto& f = shared_fabric();
    for (const auto& ab : f.abs()) {
        for (const auto& u : ab.uplinks) {
            EXPECT_GE(u.fiber_m, f.config().fiber_min_m);
            EXPECT_LE(u.fiber_m, f.config().fiber_max_m);
        }
    }
}

TEST(Fabric, CapacityExceededAtBuild) {
    auto c = small_config();
    c.ocs_count = 1;
    c.n_abs = 8;
    c.uplinks_per_ab = 40;
    EXPECT_THROW(Fabric::build(c), CapacityExceeded);
}

TEST(Fabric, FingerprintTracksStructure) {
    auto f = shared_fabric();
    const auto fp = f.fingerprint();
    EXPECT_EQ(fp, shared_fabric().fingerprint());
    f.remove_link(f.links().begin()->first);
    EXPECT_NE(f.fingerprint(), fp);
}

TEST(Fabric, MixedGenerationsNegotiate) {
    auto c = small_config();
    c.generations = {"400G-CWDM4", "400G-CWDM4", "200G-CWDM4", "100G-CWDM4"};
    const auto f = Fabric::build(c);
    EXPECT_EQ(f.pair_rate(0, 1).rate_gbps, 400);
    EXPECT_EQ(f.pair_rate(0, 2).rate_gbps, 200);
    EXPECT_EQ(f.pair_rate(2, 3).rate_gbps, 100);
    EXPECT_EQ(f.pair_rate(3, 0).rate_gbps, 100);
}

}  // namespace
