#include "ocsfab/fabric.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "ocsfab/rng.hpp"

namespace ocsfab {

void StripingMatrix::set(int a, int b, int links) {
    if (a == b) throw std::invalid_argument("striping diagonal must stay zero");
    if (links < 0) throw std::invalid_argument("link count must be non-negative");
    counts_[index(a, b)] = links;
    counts_[index(b, a)] = links;
}

int StripingMatrix::row_sum(int a) const {
    int s = 0;
    for (int b = 0; b < n_; ++b) s += at(a, b);
    return s;
}

int StripingMatrix::total_links() const {
    int s = 0;
    for (auto [a, b] : pairs()) s += at(a, b);
    return s;
}

std::vector<std::pair<int, int>> StripingMatrix::pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < n_; ++a) {
        for (int b = a + 1; b < n_; ++b) out.emplace_back(a, b);
    }
    return out;
}

namespace {

// Include-first depth-first search over pairs in lexicographic order for the
// first remainder assignment that reaches `target` extra links.
class RemainderSearch {
public:
    RemainderSearch(int n, int per_node) : n_(n), deficit_(static_cast<std::size_t>(n), per_node) {
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) pairs_.emplace_back(a, b);
        }
        // remaining_[p * n + a]: pairs at index >= p that touch node a.
        remaining_.assign((pairs_.size() + 1) * static_cast<std::size_t>(n), 0);
        for (std::size_t p = pairs_.size(); p-- > 0;) {
            for (int a = 0; a < n; ++a) remaining_[p * n + a] = remaining_[(p + 1) * n + a];
            remaining_[p * n + pairs_[p].first] += 1;
            remaining_[p * n + pairs_[p].second] += 1;
        }
        target_ = n * per_node / 2;
        chosen_.assign(pairs_.size(), false);
    }

    std::optional<std::vector<std::pair<int, int>>> run(long budget) {
        budget_ = budget;
        if (!dfs(0, 0)) return std::nullopt;
        std::vector<std::pair<int, int>> out;
        for (std::size_t p = 0; p < pairs_.size(); ++p) {
            if (chosen_[p]) out.push_back(pairs_[p]);
        }
        return out;
    }

private:
    int bound(std::size_t p) const {
        int s = 0;
        for (int a = 0; a < n_; ++a) s += std::min(deficit_[a], remaining_[p * n_ + a]);
        return s / 2;
    }

    bool dfs(std::size_t p, int taken) {
        if (taken == target_) return true;
        if (p == pairs_.size() || --budget_ < 0) return false;
        if (taken + bound(p) < target_) return false;
        auto [a, b] = pairs_[p];
        if (deficit_[a] > 0 && deficit_[b] > 0) {
            --deficit_[a];
            --deficit_[b];
            chosen_[p] = true;
            if (dfs(p + 1, taken + 1)) return true;
            chosen_[p] = false;
            ++deficit_[a];
            ++deficit_[b];
        }
        return dfs(p + 1, taken);
    }

    int n_;
    std::vector<int> deficit_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<int> remaining_;
    std::vector<bool> chosen_;
    int target_ = 0;
    long budget_ = 0;
};

// Circulant fallback: always reaches floor(n * r / 2) extra links.
std::vector<std::pair<int, int>> circulant_remainder(int n, int r) {
    std::set<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
        for (int k = 1; k <= r / 2; ++k) {
            const int b = (a + k) % n;
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    if (r % 2 == 1) {
        for (int a = 0; a < n / 2; ++a) edges.emplace(a, a + n / 2);
    }
    return {edges.begin(), edges.end()};
}

}  // namespace

StripingMatrix canonical_striping(int n_abs, int uplinks_per_ab) {
    if (n_abs < 1) throw ConfigInvalid("striping needs at least one AB");
    if (uplinks_per_ab < 0) throw ConfigInvalid("uplinks must be non-negative");
    StripingMatrix s(n_abs);
    if (n_abs == 1) return s;
    const int base = uplinks_per_ab / (n_abs - 1);
    const int rem = uplinks_per_ab % (n_abs - 1);
    for (auto [a, b] : s.pairs()) s.set(a, b, base);
    if (rem == 0) return s;
    RemainderSearch search(n_abs, rem);
    auto extras = search.run(2'000'000);
    if (!extras) extras = circulant_remainder(n_abs, rem);
    for (auto [a, b] : *extras) s.add(a, b, 1);
    return s;
}

int AggregationBlock::assigned() const {
    return static_cast<int>(std::count_if(uplinks.begin(), uplinks.end(), [](const Uplink& u) { return u.link_id.has_value(); }));
}

std::optional<int> AggregationBlock::first_free_uplink() const {
    for (std::size_t i = 0; i < uplinks.size(); ++i) {
        if (!uplinks[i].link_id) return static_cast<int>(i);
    }
    return std::nullopt;
}

Placement PhysicalLayout::place(int ocs_index) const {
    const int within = ocs_index / zones;
    return {ocs_index % zones, within % racks_per_zone, within / racks_per_zone};
}

bool LinkRealization::uses_spare(const OcsDevice& dev) const {
    return dev.is_spare(forward.in_port) || dev.is_spare(forward.out_port);
}

std::string to_string(const FailureTarget& t) {
    switch (t.kind) {
        case FailureTarget::Kind::Zone: return fmt::format("zone {}", t.zone);
        case FailureTarget::Kind::Rack: return fmt::format("zone {} rack {}", t.zone, t.rack);
        case FailureTarget::Kind::Ocs: return fmt::format("ocs {}", t.ocs);
        case FailureTarget::Kind::PowerFeed: return fmt::format("zone {} feed {}", t.zone, t.feed);
    }
    return "unknown";
}

std::vector<std::string> FabricConfig::validate() const {
    std::vector<std::string> problems;
    if (n_abs < 1) problems.emplace_back("n_abs must be at least 1");
    if (uplinks_per_ab < 1) problems.emplace_back("uplinks must be at least 1");
    if (ocs_count < 1 || ocs_count > layout.max_ocs()) {
        problems.push_back(fmt::format("ocs_count must be in [1, {}]", layout.max_ocs()));
    }
    if (generations.empty() || (generations.size() != 1 && static_cast<int>(generations.size()) != n_abs)) {
        problems.emplace_back("generations must list one entry or one per AB");
    }
    for (const auto& g : generations) {
        if (!generation_table.find(g)) problems.push_back(fmt::format("generation '{}' is not defined", g));
    }
    auto table = generation_table.validate();
    problems.insert(problems.end(), table.begin(), table.end());
    auto dev = device.validate();
    problems.insert(problems.end(), dev.begin(), dev.end());
    auto circ = optics.circulator.validate();
    if (optics.circulators) problems.insert(problems.end(), circ.begin(), circ.end());
    if (!(fiber_min_m > 0.0 && fiber_min_m <= fiber_max_m)) problems.emplace_back("fiber range must satisfy 0 < min <= max");
    if (2.0 * fiber_max_m > optics.max_fiber_m) problems.emplace_back("two fiber legs may exceed the path length limit");
    return problems;
}

Fabric Fabric::build(const FabricConfig& config) {
    if (auto problems = config.validate(); !problems.empty()) throw ConfigInvalid(problems.front());

    const int per_link = config.mode == LinkMode::Circulator ? 1 : 2;
    const long usable = static_cast<long>(config.ocs_count) * (config.device.radix - config.device.spare_ports);
    const StripingMatrix target = canonical_striping(config.n_abs, config.uplinks_per_ab);
    if (static_cast<long>(target.total_links()) * per_link > usable) {
        throw CapacityExceeded(fmt::format("{} links need {} ports per side, only {} available", target.total_links(),
                                           target.total_links() * per_link, usable));
    }

    Fabric f;
    f.config_ = config;
    f.ocses_.reserve(static_cast<std::size_t>(config.ocs_count));
    std::vector<std::optional<OcsDevice>> devices(static_cast<std::size_t>(config.ocs_count));
    const int n = config.ocs_count;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        // Units failing the mirror down-select are scrapped and rebuilt.
        for (std::uint64_t attempt = 0; attempt < 64 && !devices[i]; ++attempt) {
            try {
                devices[i] = OcsDevice::manufacture(config.device, derive_seed(config.seed, 0x0C5, i, attempt));
            } catch (const ManufacturingFailure&) {
            }
        }
        if (devices[i]) devices[i]->install_calibration(calibrate(*devices[i], derive_seed(config.seed, 0xCA1B, i)));
    }
    for (int i = 0; i < n; ++i) {
        if (!devices[i]) throw ConfigInvalid(fmt::format("mirror yield too low to produce OCS {}", i));
        f.ocses_.push_back(OcsSlot{i, config.layout.place(i), std::move(*devices[i])});
    }
    for (int a = 0; a < config.n_abs; ++a) {
        f.add_ab(config.generations.size() == 1 ? config.generations.front() : config.generations[a],
                 config.uplinks_per_ab);
    }
    f.realize_striping(target);
    return f;
}

const LinkRealization& Fabric::link(int id) const {
    auto it = links_.find(id);
    if (it == links_.end()) throw Error(fmt::format("unknown link {}", id));
    return it->second;
}

StripingMatrix Fabric::striping() const {
    StripingMatrix s(n_abs());
    for (const auto& [id, l] : links_) s.add(l.ab_a, l.ab_b, 1);
    return s;
}

int Fabric::add_ab(const std::string& generation, int uplinks) {
    config_.generation_table.at(generation);
    AggregationBlock ab;
    ab.id = n_abs();
    ab.generation = generation;
    ab.uplink_count = uplinks;
    Rng rng(derive_seed(config_.seed, 0xF1B, static_cast<std::uint64_t>(ab.id)));
    for (int u = 0; u < uplinks; ++u) {
        ab.uplinks.push_back({ab.id * 100000 + u, rng.uniform(config_.fiber_min_m, config_.fiber_max_m), std::nullopt});
    }
    abs_.push_back(std::move(ab));
    ++revision_;
    return abs_.back().id;
}

std::vector<int> Fabric::free_ports(const OcsDevice& dev, bool input, int count, bool spare) const {
    std::vector<int> out;
    for (int p = 1; p <= dev.radix() && static_cast<int>(out.size()) < count; ++p) {
        if (dev.is_spare(p) != spare) continue;
        if (input ? dev.in_free(p) : dev.out_free(p)) out.push_back(p);
    }
    return out;
}

bool Fabric::has_free_uplink(int ab) const { return abs_.at(static_cast<std::size_t>(ab)).first_free_uplink().has_value(); }

ComposedLink Fabric::compose_link(UplinkRef a, UplinkRef b, const OcsPath& path) {
    if (a.ab == b.ab) throw std::invalid_argument("a link needs two distinct ABs");
    if (a.ab > b.ab) std::swap(a, b);
    auto& ab_a = abs_.at(static_cast<std::size_t>(a.ab));
    auto& ab_b = abs_.at(static_cast<std::size_t>(b.ab));
    auto& up_a = ab_a.uplinks.at(static_cast<std::size_t>(a.uplink));
    auto& up_b = ab_b.uplinks.at(static_cast<std::size_t>(b.uplink));
    if (up_a.link_id) throw ResourceBusy(fmt::format("AB {} uplink {} is in use", a.ab, a.uplink));
    if (up_b.link_id) throw ResourceBusy(fmt::format("AB {} uplink {} is in use", b.ab, b.uplink));
    if ((config_.mode == LinkMode::DuplexPair) != path.reverse.has_value()) {
        throw std::invalid_argument("cross-connect count does not match link mode");
    }
    auto& dev = ocses_.at(static_cast<std::size_t>(path.ocs)).device;
    std::vector<CrossConnect> xcs{path.forward};
    if (path.reverse) xcs.push_back(*path.reverse);
    for (const auto& xc : xcs) {
        if (!dev.in_free(xc.in_port)) throw ResourceBusy(fmt::format("OCS {} in-port {} is in use", path.ocs, xc.in_port));
        if (!dev.out_free(xc.out_port)) throw ResourceBusy(fmt::format("OCS {} out-port {} is in use", path.ocs, xc.out_port));
    }
    if (path.reverse && (path.reverse->in_port == path.forward.in_port || path.reverse->out_port == path.forward.out_port)) {
        throw ResourceBusy("duplex pair reuses a port");
    }
    for (const auto& xc : xcs) dev.connect(xc.in_port, xc.out_port);

    LinkRealization l{next_link_id_++, a.ab, b.ab, a.uplink, b.uplink, path.ocs, path.forward, path.reverse};
    up_a.link_id = l.id;
    up_b.link_id = l.id;
    pair_links_[{a.ab, b.ab}].push_back(l.id);
    links_.emplace(l.id, l);
    ++revision_;
    return {l.id, link_path(l.id)};
}

std::optional<int> Fabric::choose_ocs(int ab_a, int ab_b) const {
    if (ab_a > ab_b) std::swap(ab_a, ab_b);
    const int need = ports_per_link();
    std::vector<int> pair_on_ocs(ocses_.size(), 0);
    std::vector<int> pair_in_zone(static_cast<std::size_t>(config_.layout.zones), 0);
    std::vector<int> zone_load(static_cast<std::size_t>(config_.layout.zones), 0);
    if (auto it = pair_links_.find({ab_a, ab_b}); it != pair_links_.end()) {
        for (int id : it->second) {
            const int o = links_.at(id).ocs;
            ++pair_on_ocs[o];
            ++pair_in_zone[ocses_[o].placement.zone];
        }
    }
    for (const auto& s : ocses_) zone_load[s.placement.zone] += s.device.connection_count();

    std::optional<int> best;
    std::tuple<int, int, int, int, int> best_key{};
    for (const auto& s : ocses_) {
        if (static_cast<int>(free_ports(s.device, true, need, false).size()) < need ||
            static_cast<int>(free_ports(s.device, false, need, false).size()) < need) {
            continue;
        }
        const int z = s.placement.zone;
        std::tuple key{pair_on_ocs[s.id], config_.uniform_zones ? pair_in_zone[z] : 0,
                       config_.uniform_zones ? zone_load[z] : 0, s.device.connection_count(), s.id};
        if (!best || key < best_key) {
            best = s.id;
            best_key = key;
        }
    }
    return best;
}

int Fabric::add_link(int ab_a, int ab_b) {
    if (ab_a == ab_b) throw std::invalid_argument("a link needs two distinct ABs");
    const auto ua = abs_.at(static_cast<std::size_t>(ab_a)).first_free_uplink();
    const auto ub = abs_.at(static_cast<std::size_t>(ab_b)).first_free_uplink();
    if (!ua || !ub) throw InsufficientPorts(fmt::format("no free uplink for link {}-{}", ab_a, ab_b));
    const auto ocs = choose_ocs(ab_a, ab_b);
    if (!ocs) throw InsufficientPorts(fmt::format("no OCS has free ports for link {}-{}", ab_a, ab_b));
    const auto& dev = ocses_[*ocs].device;
    const int need = ports_per_link();
    const auto ins = free_ports(dev, true, need, false);
    const auto outs = free_ports(dev, false, need, false);
    OcsPath path{*ocs, {ins[0], outs[0]}, std::nullopt};
    if (need == 2) path.reverse = CrossConnect{ins[1], outs[1]};
    return compose_link({ab_a, *ua}, {ab_b, *ub}, path).link_id;
}

void Fabric::remove_link(int link_id) {
    const LinkRealization l = link(link_id);
    auto& dev = ocses_[l.ocs].device;
    dev.disconnect(l.forward.in_port);
    if (l.reverse) dev.disconnect(l.reverse->in_port);
    abs_[l.ab_a].uplinks[l.uplink_a].link_id.reset();
    abs_[l.ab_b].uplinks[l.uplink_b].link_id.reset();
    auto& ids = pair_links_[{l.ab_a, l.ab_b}];
    ids.erase(std::find(ids.begin(), ids.end(), link_id));
    links_.erase(link_id);
    ++revision_;
}

bool Fabric::move_to_spare(int link_id) {
    LinkRealization& l = links_.at(link_id);
    auto& dev = ocses_[l.ocs].device;
    const int need = ports_per_link();
    const auto ins = free_ports(dev, true, need, true);
    const auto outs = free_ports(dev, false, need, true);
    if (static_cast<int>(ins.size()) < need || static_cast<int>(outs.size()) < need) return false;
    dev.disconnect(l.forward.in_port);
    if (l.reverse) dev.disconnect(l.reverse->in_port);
    l.forward = {ins[0], outs[0]};
    dev.connect(ins[0], outs[0]);
    if (l.reverse) {
        l.reverse = CrossConnect{ins[1], outs[1]};
        dev.connect(ins[1], outs[1]);
    }
    ++revision_;
    return true;
}

void Fabric::clear_links() {
    std::vector<int> ids;
    for (const auto& [id, l] : links_) ids.push_back(id);
    for (int id : ids) remove_link(id);
}

RealizationReport Fabric::realize_striping(const StripingMatrix& striping) {
    if (striping.size() != n_abs()) throw ConfigInvalid("striping size does not match AB count");
    for (int a = 0; a < n_abs(); ++a) {
        if (striping.row_sum(a) > abs_[a].uplink_count) {
            throw InsufficientPorts(fmt::format("AB {} needs {} uplinks, has {}", a, striping.row_sum(a), abs_[a].uplink_count));
        }
    }
    clear_links();
    // Interleave pairs so every pair sees the same global load picture.
    std::vector<std::pair<int, int>> pending;
    std::vector<int> left;
    for (auto [a, b] : striping.pairs()) {
        if (striping.at(a, b) > 0) {
            pending.emplace_back(a, b);
            left.push_back(striping.at(a, b));
        }
    }
    for (bool progress = true; progress;) {
        progress = false;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (left[i] == 0) continue;
            add_link(pending[i].first, pending[i].second);
            --left[i];
            progress = true;
        }
    }
    return realization_report();
}

RealizationReport Fabric::realization_report() const {
    RealizationReport r;
    r.links = static_cast<int>(links_.size());
    r.links_per_ocs.assign(ocses_.size(), 0);
    for (const auto& s : ocses_) r.ocs_ports_used += 2 * s.device.connection_count();
    for (const auto& [id, l] : links_) ++r.links_per_ocs[l.ocs];
    r.fibers_used = r.links * (config_.mode == LinkMode::Circulator ? 2 : 4);
    return r;
}

LinkPath Fabric::link_path(int link_id) const {
    const auto& l = link(link_id);
    const auto& dev = ocses_[l.ocs].device;
    const auto& ga = config_.generation_table.at(abs_[l.ab_a].generation);
    const auto& gb = config_.generation_table.at(abs_[l.ab_b].generation);
    LinkSpec spec{ga, gb, config_.optics, abs_[l.ab_a].uplinks[l.uplink_a].fiber_m,
                  abs_[l.ab_b].uplinks[l.uplink_b].fiber_m, std::nullopt};
    spec.optics.circulators = config_.mode == LinkMode::Circulator;
    spec.ocs = OcsTraversal{l.ocs,
                            l.forward.in_port,
                            l.forward.out_port,
                            dev.insertion_loss_db(l.forward.in_port, l.forward.out_port),
                            dev.return_loss_db(PortSide::In, l.forward.in_port),
                            dev.return_loss_db(PortSide::Out, l.forward.out_port),
                            dev.profile().freespace_m};
    return build_link_path(spec);
}

Negotiated Fabric::pair_rate(int ab_a, int ab_b) const {
    return negotiate_interop(config_.generation_table.at(abs_.at(static_cast<std::size_t>(ab_a)).generation),
                             config_.generation_table.at(abs_.at(static_cast<std::size_t>(ab_b)).generation));
}

double Fabric::link_capacity_gbps(int link_id) const {
    const auto& l = link(link_id);
    return pair_rate(l.ab_a, l.ab_b).rate_gbps;
}

std::vector<std::vector<double>> Fabric::pair_rates() const {
    const auto n = static_cast<std::size_t>(n_abs());
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a != b) r[a][b] = pair_rate(static_cast<int>(a), static_cast<int>(b)).rate_gbps;
        }
    }
    return r;
}

double Fabric::released_capacity_gbps() const {
    double c = 0.0;
    for (const auto& [id, l] : links_) c += link_capacity_gbps(id);
    return c;
}

FailureImpact Fabric::failure_impact(const FailureTarget& t) const {
    std::vector<bool> dead(ocses_.size(), false);
    for (const auto& s : ocses_) {
        const auto& p = s.placement;
        switch (t.kind) {
            case FailureTarget::Kind::Zone: dead[s.id] = p.zone == t.zone; break;
            case FailureTarget::Kind::Rack: dead[s.id] = p.zone == t.zone && p.rack == t.rack; break;
            case FailureTarget::Kind::Ocs: dead[s.id] = s.id == t.ocs; break;
            case FailureTarget::Kind::PowerFeed: {
                if (p.zone != t.zone) break;
                // PSU i draws from feed 'A' + i % 2.
                int live = 0;
                const auto& psus = s.device.chassis().psu_healthy;
                for (std::size_t i = 0; i < psus.size(); ++i) {
                    if (psus[i] && static_cast<char>('A' + i % 2) != t.feed) ++live;
                }
                dead[s.id] = live < s.device.profile().min_psus;
                break;
            }
        }
    }
    FailureImpact impact;
    impact.links_total = static_cast<int>(links_.size());
    std::set<std::pair<int, int>> pairs;
    for (const auto& [id, l] : links_) {
        if (!dead[l.ocs]) continue;
        ++impact.links_lost;
        pairs.emplace(l.ab_a, l.ab_b);
    }
    impact.affected_ab_pairs.assign(pairs.begin(), pairs.end());
    impact.capacity_lost_fraction =
        impact.links_total == 0 ? 0.0 : static_cast<double>(impact.links_lost) / impact.links_total;
    return impact;
}

LayoutReport Fabric::layout_report() const {
    LayoutReport r;
    r.feed_budget_w = config_.layout.feed_kw * 1000.0;
    r.ups_budget_w = config_.layout.ups_kw * 1000.0;
    if (ocses_.empty() && abs_.empty()) return r;
    for (int z = 0; z < config_.layout.zones; ++z) {
        ZoneReport zr;
        zr.zone = z;
        zr.ocs_per_rack.assign(static_cast<std::size_t>(config_.layout.racks_per_zone), 0);
        r.zones.push_back(zr);
    }
    for (const auto& s : ocses_) {
        auto& zr = r.zones[s.placement.zone];
        ++zr.ocs_count;
        ++zr.ocs_per_rack[s.placement.rack];
        zr.power_w += s.device.power_draw_w();
        zr.worst_case_power_w += s.device.profile().max_power_w;
    }
    for (const auto& zr : r.zones) {
        r.total_power_w += zr.power_w;
        r.worst_case_power_w += zr.worst_case_power_w;
    }
    for (const auto& ab : abs_) {
        for (const auto& u : ab.uplinks) r.fiber_lengths_m.push_back(u.fiber_m);
    }
    return r;
}

std::uint64_t Fabric::fingerprint() const {
    std::uint64_t h = splitmix64(revision_ ^ 0x5EEDull);
    const auto mix = [&](std::uint64_t v) { h = splitmix64(h ^ v); };
    mix(static_cast<std::uint64_t>(abs_.size()));
    for (const auto& [id, l] : links_) {
        mix(static_cast<std::uint64_t>(id));
        mix(static_cast<std::uint64_t>(l.ab_a) << 32 | static_cast<std::uint32_t>(l.ab_b));
        mix(static_cast<std::uint64_t>(l.ocs) << 32 | static_cast<std::uint32_t>(l.forward.in_port << 16 | l.forward.out_port));
    }
    return h;
}

}  // namespace ocsfab
