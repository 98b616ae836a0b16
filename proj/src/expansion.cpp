#include "ocsfab/expansion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "ocsfab/report_format.hpp"
#include "ocsfab/rng.hpp"

namespace ocsfab {

namespace {

constexpr std::array<const char*, 10> kStateNames{"Live",     "Pending",  "Draining", "Reconfiguring",
                                                  "Qualifying", "SpareReconfiguring", "SpareQualifying",
                                                  "Released", "Failed",   "Removed"};

int ports_per_link(const Fabric& f) { return f.config().mode == LinkMode::Circulator ? 1 : 2; }

double capacity_tolerance(double c0) { return 1e-9 * std::max(1.0, c0); }

int resolve_uplinks(const Fabric& fabric, const NewAbSpec& spec) {
    return spec.uplinks > 0 ? spec.uplinks : fabric.config().uplinks_per_ab;
}

}  // namespace

std::string to_string(LinkState s) { return kStateNames[static_cast<std::size_t>(s)]; }

std::optional<LinkState> parse_link_state(const std::string& s) {
    for (std::size_t i = 0; i < kStateNames.size(); ++i) {
        if (s == kStateNames[i]) return static_cast<LinkState>(i);
    }
    return std::nullopt;
}

bool link_transition_allowed(LinkState from, LinkState to) {
    using S = LinkState;
    switch (from) {
        case S::Live: return to == S::Draining;
        case S::Draining: return to == S::Removed;
        case S::Pending: return to == S::Reconfiguring;
        case S::Reconfiguring: return to == S::Qualifying;
        case S::Qualifying:
            return to == S::Qualifying || to == S::Released || to == S::Failed || to == S::SpareReconfiguring;
        case S::SpareReconfiguring: return to == S::SpareQualifying;
        case S::SpareQualifying: return to == S::SpareQualifying || to == S::Released || to == S::Failed;
        default: return false;
    }
}

bool step_transition_allowed(LinkState from, LinkState to) {
    using S = LinkState;
    switch (from) {
        case S::Pending: return to == S::Draining || to == S::Failed;
        case S::Draining: return to == S::Reconfiguring;
        case S::Reconfiguring: return to == S::Qualifying;
        case S::Qualifying: return to == S::Released || to == S::Failed;
        default: return false;
    }
}

RestripePlan plan_expansion(const Fabric& fabric, const std::vector<NewAbSpec>& new_abs, double drain_limit,
                            const std::optional<StripingMatrix>& target) {
    if (!(drain_limit > 0.0 && drain_limit <= 1.0)) {
        throw ConfigInvalid(fmt::format("drain_limit must be in (0, 1], got {}", drain_limit));
    }
    const int uplinks = fabric.config().uplinks_per_ab;
    for (const auto& spec : new_abs) {
        fabric.config().generation_table.at(spec.generation);
        if (resolve_uplinks(fabric, spec) != uplinks) {
            throw ConfigInvalid(fmt::format("new ABs must have {} uplinks like the existing ones", uplinks));
        }
    }
    const int n_total = fabric.n_abs() + static_cast<int>(new_abs.size());

    RestripePlan plan;
    plan.new_abs = new_abs;
    plan.drain_limit = drain_limit;
    plan.source = fabric.striping();
    plan.target = target ? *target : canonical_striping(n_total, uplinks);
    plan.source_revision = fabric.revision();
    plan.source_fingerprint = fabric.fingerprint();
    plan.source_capacity_gbps = fabric.released_capacity_gbps();

    if (plan.target.size() != n_total) throw ConfigInvalid("target striping size does not match the expanded AB count");
    for (int a = 0; a < n_total; ++a) {
        if (plan.target.row_sum(a) > uplinks) {
            throw ConfigInvalid(fmt::format("target needs {} uplinks on AB {}, only {} exist", plan.target.row_sum(a), a, uplinks));
        }
    }
    const auto& dev = fabric.config().device;
    const long usable = static_cast<long>(fabric.ocses().size()) * (dev.radix - dev.spare_ports);
    if (static_cast<long>(plan.target.total_links()) * ports_per_link(fabric) > usable) {
        throw CapacityExceeded(fmt::format("{} ABs need {} links, the OCS layer has ports for {}", n_total,
                                           plan.target.total_links(), usable / ports_per_link(fabric)));
    }
    if (new_abs.empty() && plan.source == plan.target) return plan;

    Fabric sim = fabric;
    for (const auto& spec : new_abs) sim.add_ab(spec.generation, uplinks);

    // Surplus links per pair, drained in (OCS id, link id) order.
    std::vector<int> drain_queue;
    {
        std::map<std::pair<int, int>, int> surplus;
        for (const auto& [a, b] : plan.target.pairs()) {
            const int cur = a < fabric.n_abs() && b < fabric.n_abs() ? plan.source.at(a, b) : 0;
            if (cur > plan.target.at(a, b)) surplus[{a, b}] = cur - plan.target.at(a, b);
        }
        std::vector<std::tuple<int, int, int>> ordered;
        for (const auto& [id, l] : sim.links()) ordered.emplace_back(l.ocs, id, 0);
        std::sort(ordered.begin(), ordered.end());
        for (const auto& [ocs, id, unused] : ordered) {
            const auto& l = sim.link(id);
            auto it = surplus.find({l.ab_a, l.ab_b});
            if (it != surplus.end() && it->second > 0) {
                drain_queue.push_back(id);
                --it->second;
            }
        }
    }

    const double floor = plan.capacity_floor_gbps();
    const double tol = capacity_tolerance(plan.source_capacity_gbps);
    std::size_t next_drain = 0;
    while (!(sim.striping() == plan.target)) {
        RestripeStep step;
        const int released = static_cast<int>(sim.links().size());
        const int budget = static_cast<int>(std::floor(drain_limit * released + 1e-9));
        double cap = sim.released_capacity_gbps();
        while (next_drain < drain_queue.size() && static_cast<int>(step.links_to_drain.size()) < budget) {
            const int id = drain_queue[next_drain];
            const double c = sim.link_capacity_gbps(id);
            if (cap - c < floor - tol) break;
            const auto l = sim.link(id);
            step.links_to_drain.push_back(id);
            step.ocs_ops.push_back({OcsOp::Kind::Disconnect, l.ocs, l.forward, id});
            if (l.reverse) step.ocs_ops.push_back({OcsOp::Kind::Disconnect, l.ocs, *l.reverse, id});
            sim.remove_link(id);
            cap -= c;
            ++next_drain;
        }

        const StripingMatrix now = sim.striping();
        std::vector<std::pair<int, int>> deficit;
        std::vector<int> missing;
        for (const auto& [a, b] : plan.target.pairs()) {
            if (plan.target.at(a, b) > now.at(a, b)) {
                deficit.emplace_back(a, b);
                missing.push_back(plan.target.at(a, b) - now.at(a, b));
            }
        }
        for (bool progress = true; progress;) {
            progress = false;
            for (std::size_t i = 0; i < deficit.size(); ++i) {
                const auto [a, b] = deficit[i];
                if (missing[i] == 0 || !sim.has_free_uplink(a) || !sim.has_free_uplink(b) || !sim.choose_ocs(a, b)) continue;
                const int id = sim.add_link(a, b);
                const auto& l = sim.link(id);
                PlannedLink p{id, l.ab_a, l.ab_b, l.uplink_a, l.uplink_b, {l.ocs, l.forward, l.reverse}};
                step.ocs_ops.push_back({OcsOp::Kind::Connect, l.ocs, l.forward, id});
                if (l.reverse) step.ocs_ops.push_back({OcsOp::Kind::Connect, l.ocs, *l.reverse, id});
                step.links_to_qualify.push_back(p);
                --missing[i];
                progress = true;
            }
        }
        if (step.links_to_drain.empty() && step.links_to_qualify.empty()) {
            throw Error(fmt::format("expansion stalls after {} steps: the drain limit and capacity floor allow no move",
                                    plan.steps.size()));
        }
        plan.steps.push_back(std::move(step));
    }
    return plan;
}

std::vector<PlanViolation> validate_plan(const Fabric& fabric, const RestripePlan& plan) {
    std::vector<PlanViolation> out;
    if (fabric.revision() != plan.source_revision || fabric.fingerprint() != plan.source_fingerprint) {
        out.push_back({0, "stale", "fabric changed since the plan was made"});
    }
    if (!(plan.drain_limit > 0.0 && plan.drain_limit <= 1.0)) {
        out.push_back({0, "drain_limit", fmt::format("drain_limit {} outside (0, 1]", plan.drain_limit)});
        return out;
    }

    Fabric sim = fabric;
    for (const auto& spec : plan.new_abs) {
        try {
            sim.add_ab(spec.generation, resolve_uplinks(fabric, spec));
        } catch (const Error& e) {
            out.push_back({0, "unknown resource", e.what()});
            return out;
        }
    }
    const double c0 = fabric.released_capacity_gbps();
    const double floor = (1.0 - plan.drain_limit) * c0;
    const double tol = capacity_tolerance(c0);
    std::set<int> drained;

    for (std::size_t s = 0; s < plan.steps.size(); ++s) {
        const auto& step = plan.steps[s];
        const int si = static_cast<int>(s);
        const int released = static_cast<int>(sim.links().size());
        const int budget = static_cast<int>(std::floor(plan.drain_limit * released + 1e-9));
        if (static_cast<int>(step.links_to_drain.size()) > budget) {
            out.push_back({si, "budget", fmt::format("drains {} of {} released links, limit {}", step.links_to_drain.size(),
                                                     released, budget)});
        }
        double cap = sim.released_capacity_gbps();
        for (int id : step.links_to_drain) {
            if (!drained.insert(id).second) {
                out.push_back({si, "double drain", fmt::format("link {} is drained twice", id)});
                continue;
            }
            if (!sim.links().count(id)) {
                out.push_back({si, "unknown resource", fmt::format("link {} does not exist", id)});
                continue;
            }
            cap -= sim.link_capacity_gbps(id);
            sim.remove_link(id);
        }
        if (cap < floor - tol) {
            out.push_back({si, "capacity floor", fmt::format("released capacity {} Gb/s below floor {} Gb/s",
                                                             round_sig(cap), round_sig(floor))});
        }
        for (const auto& p : step.links_to_qualify) {
            if (p.path.ocs < 0 || p.path.ocs >= static_cast<int>(sim.ocses().size())) {
                out.push_back({si, "unknown resource", fmt::format("OCS {} does not exist", p.path.ocs)});
                continue;
            }
            if (p.ab_a < 0 || p.ab_b >= sim.n_abs() || p.ab_a >= p.ab_b) {
                out.push_back({si, "unknown resource", fmt::format("AB pair {}-{} is not valid", p.ab_a, p.ab_b)});
                continue;
            }
            const int radix = sim.ocses()[p.path.ocs].device.radix();
            auto in_range = [radix](const CrossConnect& xc) {
                return xc.in_port >= 1 && xc.in_port <= radix && xc.out_port >= 1 && xc.out_port <= radix;
            };
            if (!in_range(p.path.forward) || (p.path.reverse && !in_range(*p.path.reverse))) {
                out.push_back({si, "unknown resource", fmt::format("OCS {} port out of range", p.path.ocs)});
                continue;
            }
            try {
                const auto& ab_a = sim.abs()[p.ab_a];
                const auto& ab_b = sim.abs()[p.ab_b];
                if (p.uplink_a < 0 || p.uplink_a >= ab_a.uplink_count || p.uplink_b < 0 || p.uplink_b >= ab_b.uplink_count) {
                    out.push_back({si, "unknown resource", fmt::format("uplink out of range on link {}", p.link_id)});
                    continue;
                }
                const auto composed = sim.compose_link({p.ab_a, p.uplink_a}, {p.ab_b, p.uplink_b}, p.path);
                if (composed.link_id != p.link_id) {
                    out.push_back({si, "link id", fmt::format("planned link {} would be created as {}", p.link_id,
                                                              composed.link_id)});
                }
            } catch (const ResourceBusy& e) {
                out.push_back({si, "port busy", e.what()});
            } catch (const std::exception& e) {
                out.push_back({si, "invalid link", e.what()});
            }
        }
    }
    if (!(sim.striping() == plan.target)) {
        out.push_back({static_cast<int>(plan.steps.size()), "unreachable", "executing every step does not reach the target"});
    }
    return out;
}

std::string EventLog::to_json_lines() const {
    std::string out;
    for (const auto& e : events) {
        Json j{{"t_virtual_s", number_json(e.t_virtual_s)},
               {"step", e.step},
               {"link_id", e.link_id ? Json(*e.link_id) : Json(nullptr)},
               {"transition", to_string(e.from) + "->" + to_string(e.to)},
               {"detail", e.detail}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<std::size_t> EventLog::floor_violations() const {
    std::vector<std::size_t> out;
    const double tol = capacity_tolerance(capacity_floor_gbps);
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].released_gbps < capacity_floor_gbps - tol) out.push_back(i);
    }
    return out;
}

namespace {

class Executor {
public:
    Executor(Fabric& fabric, const RestripePlan& plan, std::uint64_t seed, const ExecuteOptions& options)
        : fabric_(fabric), plan_(plan), seed_(seed), options_(options) {
        log_.capacity_floor_gbps = plan.capacity_floor_gbps();
        released_ = fabric.released_capacity_gbps();
        dark_s_ = fabric.config().device.switch_time_ms / 1000.0;
    }

    EventLog run() {
        for (const auto& spec : plan_.new_abs) fabric_.add_ab(spec.generation, resolve_uplinks(fabric_, spec));
        for (std::size_t s = 0; s < plan_.steps.size() && !log_.halted; ++s) run_step(static_cast<int>(s));
        fabric_.bump_revision();
        return std::move(log_);
    }

private:
    void emit(int step, std::optional<int> link, LinkState from, LinkState to, std::string detail) {
        log_.events.push_back({t_, step, link, from, to, std::move(detail), released_});
    }

    void run_step(int s) {
        const auto& step = plan_.steps[static_cast<std::size_t>(s)];
        const double tol = capacity_tolerance(plan_.source_capacity_gbps);

        double after = released_;
        for (int id : step.links_to_drain) {
            if (!fabric_.links().count(id)) throw PlanStale(fmt::format("link {} is no longer in the fabric", id));
            after -= fabric_.link_capacity_gbps(id);
        }
        if (after < log_.capacity_floor_gbps - tol) {
            log_.halted = true;
            emit(s, std::nullopt, LinkState::Pending, LinkState::Failed,
                 fmt::format("halted: draining would leave {} Gb/s, floor is {} Gb/s", round_sig(after),
                             round_sig(log_.capacity_floor_gbps)));
            return;
        }

        emit(s, std::nullopt, LinkState::Pending, LinkState::Draining,
             fmt::format("draining {} links", step.links_to_drain.size()));
        for (int id : step.links_to_drain) {
            released_ -= fabric_.link_capacity_gbps(id);
            emit(s, id, LinkState::Live, LinkState::Draining, "traffic drained");
        }

        emit(s, std::nullopt, LinkState::Draining, LinkState::Reconfiguring,
             fmt::format("{} OCS operations", step.ocs_ops.size()));
        for (int id : step.links_to_drain) {
            fabric_.remove_link(id);
            emit(s, id, LinkState::Draining, LinkState::Removed, "cross-connect removed");
        }
        std::vector<int> active;
        for (const auto& p : step.links_to_qualify) {
            const auto composed = fabric_.compose_link({p.ab_a, p.uplink_a}, {p.ab_b, p.uplink_b}, p.path);
            if (composed.link_id != p.link_id) {
                throw PlanStale(fmt::format("planned link {} realized as {}", p.link_id, composed.link_id));
            }
            emit(s, p.link_id, LinkState::Pending, LinkState::Reconfiguring,
                 fmt::format("ocs {} ports {}->{}", p.path.ocs, p.path.forward.in_port, p.path.forward.out_port));
            active.push_back(p.link_id);
        }
        if (!step.ocs_ops.empty()) t_ += dark_s_;

        emit(s, std::nullopt, LinkState::Reconfiguring, LinkState::Qualifying,
             fmt::format("qualifying {} links", active.size()));
        for (int id : active) emit(s, id, LinkState::Reconfiguring, LinkState::Qualifying, "cable audit and BERT");

        std::map<int, LinkState> state;
        std::map<int, int> tries;
        for (int id : active) state[id] = LinkState::Qualifying;
        bool any_failed = false;
        while (!active.empty()) {
            std::vector<std::pair<int, QualificationResult>> results;
            for (int id : active) results.emplace_back(id, qualify(id, log_.qualification_attempts[id]++));
            t_ += options_.bert_seconds;
            std::vector<int> next;
            bool moved = false;
            for (auto& [id, q] : results) {
                const LinkState cur = state[id];
                const int attempt = ++tries[id];
                if (q.audit_pass && q.bert_pass) {
                    released_ += fabric_.link_capacity_gbps(id);
                    log_.released_links.push_back(id);
                    emit(s, id, cur, LinkState::Released, fmt::format("attempt {}: {}", attempt, q.detail));
                    continue;
                }
                if (attempt <= options_.retries) {
                    emit(s, id, cur, cur, fmt::format("attempt {}: {}; retrying", attempt, q.detail));
                    next.push_back(id);
                    continue;
                }
                const int ocs = fabric_.link(id).ocs;
                if (cur == LinkState::Qualifying && fabric_.move_to_spare(id)) {
                    ++log_.spare_moves_per_ocs[ocs];
                    const auto& l = fabric_.link(id);
                    emit(s, id, cur, LinkState::SpareReconfiguring,
                         fmt::format("attempt {}: {}; retry budget exhausted, moving to spare ports {}->{}", attempt,
                                     q.detail, l.forward.in_port, l.forward.out_port));
                    emit(s, id, LinkState::SpareReconfiguring, LinkState::SpareQualifying, "cable audit and BERT");
                    state[id] = LinkState::SpareQualifying;
                    tries[id] = 0;
                    moved = true;
                    next.push_back(id);
                    continue;
                }
                any_failed = true;
                log_.failed_links.push_back(id);
                emit(s, id, cur, LinkState::Failed,
                     fmt::format("attempt {}: {}; {}", attempt, q.detail,
                                 cur == LinkState::Qualifying ? "no spare ports free" : "spare ports also failed"));
            }
            if (moved) t_ += dark_s_;
            active = std::move(next);
        }
        emit(s, std::nullopt, LinkState::Qualifying, any_failed ? LinkState::Failed : LinkState::Released,
             any_failed ? "step finished with failed links" : "step complete");
    }

    QualificationResult qualify(int id, int attempt) {
        LinkPath path = fabric_.link_path(id);
        if (auto it = options_.impairment_db.find(id); it != options_.impairment_db.end()) {
            path.elements.push_back({ElementKind::Connector, "impairment", it->second, 0.0, 0.0});
        }
        const auto& l = fabric_.link(id);
        return qualify_link(path, fabric_.pair_rate(l.ab_a, l.ab_b), PhysicalState{true, true},
                            derive_seed(seed_, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(attempt)),
                            options_.flake_probability);
    }

    Fabric& fabric_;
    const RestripePlan& plan_;
    std::uint64_t seed_;
    ExecuteOptions options_;
    EventLog log_;
    double released_ = 0.0;
    double dark_s_ = 0.0;
    double t_ = 0.0;
};

}  // namespace

EventLog execute_plan(Fabric& fabric, const RestripePlan& plan, std::uint64_t seed, const ExecuteOptions& options) {
    if (fabric.revision() != plan.source_revision || fabric.fingerprint() != plan.source_fingerprint) {
        throw PlanStale(fmt::format("fabric is at revision {}, plan was made at revision {}", fabric.revision(),
                                    plan.source_revision));
    }
    if (options.retries < 0) throw ConfigInvalid("retries must be non-negative");
    if (!(options.flake_probability >= 0.0 && options.flake_probability <= 1.0)) {
        throw ConfigInvalid("flake probability must be in [0, 1]");
    }
    return Executor(fabric, plan, seed, options).run();
}

std::vector<std::string> check_monotone(const EventLog& log) {
    std::vector<std::string> problems;
    std::map<int, LinkState> link_state;
    std::map<int, LinkState> step_state;
    for (std::size_t i = 0; i < log.events.size(); ++i) {
        const auto& e = log.events[i];
        if (e.link_id) {
            auto it = link_state.find(*e.link_id);
            if (it != link_state.end() && it->second != e.from) {
                problems.push_back(fmt::format("event {}: link {} leaves {} but was {}", i, *e.link_id, to_string(e.from),
                                               to_string(it->second)));
            }
            if (!link_transition_allowed(e.from, e.to)) {
                problems.push_back(fmt::format("event {}: link {} moves {} -> {}", i, *e.link_id, to_string(e.from),
                                               to_string(e.to)));
            }
            link_state[*e.link_id] = e.to;
        } else {
            const LinkState prev = step_state.count(e.step) ? step_state[e.step] : LinkState::Pending;
            if (prev != e.from) {
                problems.push_back(fmt::format("event {}: step {} leaves {} but was {}", i, e.step, to_string(e.from),
                                               to_string(prev)));
            }
            if (!step_transition_allowed(e.from, e.to)) {
                problems.push_back(fmt::format("event {}: step {} moves {} -> {}", i, e.step, to_string(e.from),
                                               to_string(e.to)));
            }
            step_state[e.step] = e.to;
        }
        if (i > 0 && e.t_virtual_s < log.events[i - 1].t_virtual_s) {
            problems.push_back(fmt::format("event {}: virtual clock runs backward", i));
        }
    }
    return problems;
}

}  // namespace ocsfab
