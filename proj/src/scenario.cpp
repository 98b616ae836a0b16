#include "ocsfab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "ocsfab/optical_link.hpp"
#include "ocsfab/rng.hpp"

namespace ocsfab {

std::string action_type(const Action& a) {
    struct Visitor {
        std::string operator()(const BuildAction&) const { return "build"; }
        std::string operator()(const OptimizeAction&) const { return "optimize"; }
        std::string operator()(const ExpandAction&) const { return "expand"; }
        std::string operator()(const FailAction&) const { return "fail"; }
        std::string operator()(const ReportAction&) const { return "report"; }
    };
    return std::visit(Visitor{}, a);
}

Aborted::Aborted(int index, const std::string& cause)
    : Error(fmt::format("action {} aborted: {}", index, cause)), action_index(index) {}

namespace {

class Reader {
public:
    explicit Reader(std::vector<std::string>& violations) : v_(violations) {}

    void fail(const std::string& msg) { v_.push_back(msg); }

    const Json* field(const Json& obj, const std::string& key, const std::string& path, bool required) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) fail(fmt::format("{} required", join(path, key)));
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const Json& obj, const std::string& key, const std::string& path, bool required = false) {
        const Json* j = field(obj, key, path, required);
        if (!j) return std::nullopt;
        if (!j->is_number()) {
            fail(fmt::format("{} must be a number", join(path, key)));
            return std::nullopt;
        }
        const double d = j->get<double>();
        if (!std::isfinite(d)) {
            fail(fmt::format("{} must be finite", join(path, key)));
            return std::nullopt;
        }
        return d;
    }

    std::optional<long long> integer(const Json& obj, const std::string& key, const std::string& path,
                                     bool required = false) {
        const Json* j = field(obj, key, path, required);
        if (!j) return std::nullopt;
        if (j->is_number_integer()) return j->get<long long>();
        if (j->is_number_float()) {
            const double d = j->get<double>();
            if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
        }
        fail(fmt::format("{} must be an integer", join(path, key)));
        return std::nullopt;
    }

    std::optional<bool> boolean(const Json& obj, const std::string& key, const std::string& path) {
        const Json* j = field(obj, key, path, false);
        if (!j) return std::nullopt;
        if (!j->is_boolean()) {
            fail(fmt::format("{} must be true or false", join(path, key)));
            return std::nullopt;
        }
        return j->get<bool>();
    }

    std::optional<std::string> string(const Json& obj, const std::string& key, const std::string& path,
                                      bool required = false) {
        const Json* j = field(obj, key, path, required);
        if (!j) return std::nullopt;
        if (!j->is_string()) {
            fail(fmt::format("{} must be a string", join(path, key)));
            return std::nullopt;
        }
        return j->get<std::string>();
    }

    // One string or an array of strings.
    std::optional<std::vector<std::string>> strings(const Json& obj, const std::string& key, const std::string& path) {
        const Json* j = field(obj, key, path, false);
        if (!j) return std::nullopt;
        if (j->is_string()) return std::vector<std::string>{j->get<std::string>()};
        if (j->is_array() && std::all_of(j->begin(), j->end(), [](const Json& e) { return e.is_string(); })) {
            return j->get<std::vector<std::string>>();
        }
        fail(fmt::format("{} must be a string or an array of strings", join(path, key)));
        return std::nullopt;
    }

    bool object(const Json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(fmt::format("{} must be an object", path));
        return false;
    }

    void known_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) return;
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
                fail(fmt::format("{} is not a recognized field", join(path, it.key())));
            }
        }
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

private:
    std::vector<std::string>& v_;
};

void read_device_profile(Reader& r, const Json& j, DeviceProfile& p) {
    const std::string path = "device_profile";
    if (!r.object(j, path)) return;
    struct D {
        const char* key;
        double DeviceProfile::*field;
    };
    struct I {
        const char* key;
        int DeviceProfile::*field;
    };
    static const D doubles[] = {
        {"il_mean_db", &DeviceProfile::il_mean_db},       {"il_sigma_db", &DeviceProfile::il_sigma_db},
        {"il_min_db", &DeviceProfile::il_min_db},         {"il_max_db", &DeviceProfile::il_max_db},
        {"rl_mean_db", &DeviceProfile::rl_mean_db},       {"rl_sigma_db", &DeviceProfile::rl_sigma_db},
        {"rl_spec_db", &DeviceProfile::rl_spec_db},       {"switch_time_ms", &DeviceProfile::switch_time_ms},
        {"mirror_yield", &DeviceProfile::mirror_yield},   {"coupling_min", &DeviceProfile::coupling_min},
        {"coupling_max", &DeviceProfile::coupling_max},   {"base_power_w", &DeviceProfile::base_power_w},
        {"per_connection_power_w", &DeviceProfile::per_connection_power_w},
        {"max_power_w", &DeviceProfile::max_power_w},     {"freespace_m", &DeviceProfile::freespace_m},
    };
    static const I ints[] = {
        {"radix", &DeviceProfile::radix}, {"spare_ports", &DeviceProfile::spare_ports},
        {"hv_boards", &DeviceProfile::hv_boards}, {"psus", &DeviceProfile::psus},
        {"fans", &DeviceProfile::fans},   {"min_psus", &DeviceProfile::min_psus},
        {"min_fans", &DeviceProfile::min_fans},
    };
    std::set<std::string> known{"profile"};
    for (const auto& d : doubles) known.insert(d.key);
    for (const auto& i : ints) known.insert(i.key);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) r.fail(fmt::format("{}.{} is not a recognized field", path, it.key()));
    }
    if (auto base = r.string(j, "profile", path)) {
        if (*base == "commercial") {
            p = DeviceProfile::commercial();
        } else if (*base != "default") {
            r.fail(fmt::format("{}.profile must be \"default\" or \"commercial\"", path));
        }
    }
    for (const auto& d : doubles) {
        if (auto v = r.number(j, d.key, path)) p.*(d.field) = *v;
    }
    for (const auto& i : ints) {
        if (auto v = r.integer(j, i.key, path)) p.*(i.field) = static_cast<int>(*v);
    }
}

std::optional<TransceiverGeneration> read_generation(Reader& r, const Json& j, const std::string& path) {
    if (!r.object(j, path)) return std::nullopt;
    r.known_keys(j, path,
                 {"name", "per_lane_gbps", "lanes", "modulation", "grid_nm", "tx_power_dbm", "rx_sensitivity_dbm",
                  "rx_overload_dbm", "extinction_ratio_db", "fec_ber_threshold", "supported_rates", "latency_ns"});
    TransceiverGeneration g;
    bool ok = true;
    if (auto v = r.string(j, "name", path, true)) g.name = *v; else ok = false;
    if (auto v = r.number(j, "per_lane_gbps", path, true)) g.per_lane_gbps = *v; else ok = false;
    if (auto v = r.integer(j, "lanes", path)) g.lanes = static_cast<int>(*v);
    if (auto v = r.string(j, "modulation", path, true)) {
        if (auto m = parse_modulation(*v)) g.modulation = *m;
        else {
            r.fail(fmt::format("{}.modulation must be nrz or pam4", path));
            ok = false;
        }
    } else {
        ok = false;
    }
    if (const Json* grid = r.field(j, "grid_nm", path, false)) {
        if (grid->is_array() && std::all_of(grid->begin(), grid->end(), [](const Json& e) { return e.is_number(); })) {
            g.grid_nm = grid->get<std::vector<double>>();
        } else {
            r.fail(fmt::format("{}.grid_nm must be an array of numbers", path));
            ok = false;
        }
    }
    auto rate_key = [&](const std::string& key, const std::string& where) -> std::optional<int> {
        try {
            std::size_t used = 0;
            const int rate = std::stoi(key, &used);
            if (used == key.size() && rate > 0) return rate;
        } catch (const std::exception&) {
        }
        r.fail(fmt::format("{} key '{}' must be a positive rate in Gb/s", where, key));
        return std::nullopt;
    };
    if (const Json* tx = r.field(j, "tx_power_dbm", path, true)) {
        const std::string where = path + ".tx_power_dbm";
        if (!tx->is_object()) {
            r.fail(where + " must map rates to [min, max]");
            ok = false;
        } else {
            for (auto it = tx->begin(); it != tx->end(); ++it) {
                auto rate = rate_key(it.key(), where);
                if (!rate) { ok = false; continue; }
                const Json& v = it.value();
                if (!(v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())) {
                    r.fail(fmt::format("{}.{} must be [min, max]", where, it.key()));
                    ok = false;
                    continue;
                }
                g.tx_power_dbm[*rate] = {v[0].get<double>(), v[1].get<double>()};
            }
        }
    } else {
        ok = false;
    }
    if (const Json* rx = r.field(j, "rx_sensitivity_dbm", path, true)) {
        const std::string where = path + ".rx_sensitivity_dbm";
        if (!rx->is_object()) {
            r.fail(where + " must map rates to dBm");
            ok = false;
        } else {
            for (auto it = rx->begin(); it != rx->end(); ++it) {
                auto rate = rate_key(it.key(), where);
                if (!rate) { ok = false; continue; }
                if (!it.value().is_number()) {
                    r.fail(fmt::format("{}.{} must be a number", where, it.key()));
                    ok = false;
                    continue;
                }
                g.rx_sensitivity_dbm[*rate] = it.value().get<double>();
            }
        }
    } else {
        ok = false;
    }
    if (auto v = r.number(j, "rx_overload_dbm", path, true)) g.rx_overload_dbm = *v; else ok = false;
    if (auto v = r.number(j, "extinction_ratio_db", path)) g.extinction_ratio_db = *v;
    if (auto v = r.number(j, "fec_ber_threshold", path, true)) g.fec_ber_threshold = *v; else ok = false;
    if (auto v = r.number(j, "latency_ns", path)) g.latency_ns = *v;
    if (const Json* rates = r.field(j, "supported_rates", path, true)) {
        if (rates->is_array() && std::all_of(rates->begin(), rates->end(), [](const Json& e) { return e.is_number_integer(); })) {
            g.supported_rates = rates->get<std::vector<int>>();
        } else {
            r.fail(path + ".supported_rates must be an array of integers");
            ok = false;
        }
    } else {
        ok = false;
    }
    if (!ok) return std::nullopt;
    return g;
}

void read_link_options(Reader& r, const Json& j, LinkOptics& o) {
    const std::string path = "link";
    if (!r.object(j, path)) return;
    r.known_keys(j, path, {"patch_panels", "fiber_attenuation_db_per_km", "max_fiber_m", "circulator", "connector"});
    if (auto v = r.integer(j, "patch_panels", path)) {
        if (*v < 0) r.fail("link.patch_panels must be non-negative");
        else o.patch_panels = static_cast<int>(*v);
    }
    if (auto v = r.number(j, "fiber_attenuation_db_per_km", path)) o.fiber_attenuation_db_per_km = *v;
    if (auto v = r.number(j, "max_fiber_m", path)) o.max_fiber_m = *v;
    if (const Json* c = r.field(j, "circulator", path, false)) {
        const std::string p = "link.circulator";
        if (r.object(*c, p)) {
            r.known_keys(*c, p, {"insertion_loss_db", "directivity_db", "return_loss_db"});
            if (auto v = r.number(*c, "insertion_loss_db", p)) o.circulator.insertion_loss_db = *v;
            if (auto v = r.number(*c, "directivity_db", p)) o.circulator.directivity_db = *v;
            if (auto v = r.number(*c, "return_loss_db", p)) o.circulator.return_loss_db = *v;
        }
    }
    if (const Json* c = r.field(j, "connector", path, false)) {
        const std::string p = "link.connector";
        if (r.object(*c, p)) {
            r.known_keys(*c, p, {"loss_db", "return_loss_db"});
            if (auto v = r.number(*c, "loss_db", p)) o.connector.loss_db = *v;
            if (auto v = r.number(*c, "return_loss_db", p)) o.connector.return_loss_db = *v;
        }
    }
}

void read_fabric(Reader& r, const Json& j, FabricConfig& f) {
    const std::string path = "fabric";
    if (!r.object(j, path)) return;
    r.known_keys(j, path, {"n_abs", "uplinks", "ocs_count", "generations", "mode", "uniform_zones", "fiber_min_m",
                           "fiber_max_m", "layout"});
    if (auto v = r.integer(j, "n_abs", path, true)) f.n_abs = static_cast<int>(*v);
    if (auto v = r.integer(j, "uplinks", path, true)) f.uplinks_per_ab = static_cast<int>(*v);
    if (auto v = r.integer(j, "ocs_count", path, true)) f.ocs_count = static_cast<int>(*v);
    if (auto v = r.strings(j, "generations", path)) f.generations = *v;
    if (auto v = r.string(j, "mode", path)) {
        if (*v == "circulator") f.mode = LinkMode::Circulator;
        else if (*v == "duplex_pair") f.mode = LinkMode::DuplexPair;
        else r.fail("fabric.mode must be \"circulator\" or \"duplex_pair\"");
    }
    if (auto v = r.boolean(j, "uniform_zones", path)) f.uniform_zones = *v;
    if (auto v = r.number(j, "fiber_min_m", path)) f.fiber_min_m = *v;
    if (auto v = r.number(j, "fiber_max_m", path)) f.fiber_max_m = *v;
    if (const Json* l = r.field(j, "layout", path, false)) {
        const std::string p = "fabric.layout";
        if (r.object(*l, p)) {
            r.known_keys(*l, p, {"zones", "racks_per_zone", "ocs_per_rack", "ups_kw", "feed_kw"});
            if (auto v = r.integer(*l, "zones", p)) f.layout.zones = static_cast<int>(*v);
            if (auto v = r.integer(*l, "racks_per_zone", p)) f.layout.racks_per_zone = static_cast<int>(*v);
            if (auto v = r.integer(*l, "ocs_per_rack", p)) f.layout.ocs_per_rack = static_cast<int>(*v);
            if (auto v = r.number(*l, "ups_kw", p)) f.layout.ups_kw = *v;
            if (auto v = r.number(*l, "feed_kw", p)) f.layout.feed_kw = *v;
            if (f.layout.zones < 1 || f.layout.racks_per_zone < 1 || f.layout.ocs_per_rack < 1) {
                r.fail("fabric.layout counts must be at least 1");
            }
        }
    }
}

std::optional<DemandMatrix> read_demand(Reader& r, const std::string& name, const Json& j) {
    const std::string path = "demand_matrices." + name;
    if (!r.object(j, path)) return std::nullopt;
    r.known_keys(j, path, {"unit", "n", "data"});
    const auto unit = r.string(j, "unit", path, true);
    if (unit && *unit != "gbps") r.fail(fmt::format("{}.unit must be \"gbps\"", path));
    const auto n = r.integer(j, "n", path, true);
    const Json* data = r.field(j, "data", path, true);
    if (!n || !data) return std::nullopt;
    if (*n < 1) {
        r.fail(path + ".n must be at least 1");
        return std::nullopt;
    }
    if (!data->is_array()) {
        r.fail(path + ".data must be a row-major array of numbers");
        return std::nullopt;
    }
    if (data->size() != static_cast<std::size_t>(*n * *n)) {
        r.fail(fmt::format("{}.data has {} entries, expected {}", path, data->size(), *n * *n));
        return std::nullopt;
    }
    std::vector<double> values;
    bool ok = true;
    for (std::size_t i = 0; i < data->size(); ++i) {
        const Json& e = (*data)[i];
        if (!e.is_number()) {
            r.fail(fmt::format("{}: cell [{}][{}] must be a number", path, i / *n, i % *n));
            ok = false;
            values.push_back(0.0);
            continue;
        }
        values.push_back(e.get<double>());
    }
    DemandMatrix m(static_cast<int>(*n), std::move(values));
    for (const auto& p : m.validate()) {
        r.fail(fmt::format("{}: {}", path, p));
        ok = false;
    }
    if (!ok) return std::nullopt;
    return m;
}

std::optional<FailureTarget> read_failure_target(Reader& r, const Json& j, const std::string& path) {
    if (!r.object(j, path)) return std::nullopt;
    r.known_keys(j, path, {"kind", "zone", "rack", "ocs", "feed"});
    const auto kind = r.string(j, "kind", path, true);
    if (!kind) return std::nullopt;
    auto get = [&](const char* key) { return r.integer(j, key, path, true); };
    if (*kind == "zone") {
        if (auto z = get("zone")) return FailureTarget::of_zone(static_cast<int>(*z));
    } else if (*kind == "rack") {
        auto z = get("zone");
        auto k = get("rack");
        if (z && k) return FailureTarget::of_rack(static_cast<int>(*z), static_cast<int>(*k));
    } else if (*kind == "ocs") {
        if (auto o = get("ocs")) return FailureTarget::of_ocs(static_cast<int>(*o));
    } else if (*kind == "power_feed") {
        auto z = get("zone");
        auto feed = r.string(j, "feed", path, true);
        if (feed && *feed != "A" && *feed != "B") {
            r.fail(path + ".feed must be \"A\" or \"B\"");
            return std::nullopt;
        }
        if (z && feed) return FailureTarget::of_feed(static_cast<int>(*z), feed->front());
    } else {
        r.fail(fmt::format("{}.kind must be zone, rack, ocs or power_feed", path));
    }
    return std::nullopt;
}

std::optional<Action> read_action(Reader& r, const Json& j, const std::string& path) {
    if (!r.object(j, path)) return std::nullopt;
    const auto type = r.string(j, "type", path, true);
    if (!type) return std::nullopt;
    if (*type == "build") {
        r.known_keys(j, path, {"type"});
        return BuildAction{};
    }
    if (*type == "report") {
        r.known_keys(j, path, {"type"});
        return ReportAction{};
    }
    if (*type == "optimize") {
        r.known_keys(j, path, {"type", "demand", "policy", "apply"});
        OptimizeAction a;
        const auto d = r.string(j, "demand", path, true);
        if (!d) return std::nullopt;
        a.demand = *d;
        if (auto p = r.string(j, "policy", path)) {
            if (*p == "wcmp") a.policy = RoutingPolicy::Wcmp;
            else if (*p == "ecmp") a.policy = RoutingPolicy::Ecmp;
            else {
                r.fail(path + ".policy must be ecmp or wcmp");
                return std::nullopt;
            }
        }
        if (auto v = r.boolean(j, "apply", path)) a.apply = *v;
        return a;
    }
    if (*type == "expand") {
        r.known_keys(j, path, {"type", "new_abs", "drain_limit", "generations", "flake", "retries", "bert_seconds"});
        ExpandAction a;
        bool ok = true;
        if (auto v = r.integer(j, "new_abs", path, true)) {
            if (*v < 0) {
                r.fail(path + ".new_abs must be non-negative");
                ok = false;
            }
            a.new_abs = static_cast<int>(*v);
        } else {
            ok = false;
        }
        if (auto v = r.number(j, "drain_limit", path)) a.drain_limit = *v;
        if (!(a.drain_limit > 0.0 && a.drain_limit <= 1.0)) {
            r.fail(path + ".drain_limit must be in (0, 1]");
            ok = false;
        }
        if (auto v = r.strings(j, "generations", path)) a.generations = *v;
        if (!a.generations.empty() && a.generations.size() != 1 && static_cast<int>(a.generations.size()) != a.new_abs) {
            r.fail(path + ".generations must list one entry or one per new AB");
            ok = false;
        }
        if (auto v = r.number(j, "flake", path)) a.flake = *v;
        if (!(a.flake >= 0.0 && a.flake <= 1.0)) {
            r.fail(path + ".flake must be in [0, 1]");
            ok = false;
        }
        if (auto v = r.integer(j, "retries", path)) a.retries = static_cast<int>(*v);
        if (a.retries < 0) {
            r.fail(path + ".retries must be non-negative");
            ok = false;
        }
        if (auto v = r.number(j, "bert_seconds", path)) a.bert_seconds = *v;
        if (!(a.bert_seconds >= 0.0)) {
            r.fail(path + ".bert_seconds must be non-negative");
            ok = false;
        }
        if (!ok) return std::nullopt;
        return a;
    }
    if (*type == "fail") {
        r.known_keys(j, path, {"type", "target"});
        const Json* t = r.field(j, "target", path, true);
        if (!t) return std::nullopt;
        if (auto target = read_failure_target(r, *t, path + ".target")) return FailAction{*target};
        return std::nullopt;
    }
    r.fail(fmt::format("{}.type '{}' is not one of build, optimize, expand, fail, report", path, *type));
    return std::nullopt;
}

long usable_ports(const FabricConfig& f) {
    return static_cast<long>(f.ocs_count) * (f.device.radix - f.device.spare_ports);
}

int ports_per_link(const FabricConfig& f) { return f.mode == LinkMode::Circulator ? 1 : 2; }

// Checks that depend on the order of actions and the AB count they produce.
void check_action_sequence(Reader& r, const ScenarioConfig& c, const std::vector<std::optional<Action>>& actions) {
    const auto& f = c.fabric;
    if (actions.empty() || !actions.front() || !std::holds_alternative<BuildAction>(*actions.front())) {
        r.fail("actions[0] must be a build action");
    }
    int n = f.n_abs;
    const int uplinks = f.uplinks_per_ab;
    auto capacity_ok = [&](int abs, const std::string& where) {
        if (abs < 1 || uplinks < 1) return;
        const long need = static_cast<long>(canonical_striping(abs, uplinks).total_links()) * ports_per_link(f);
        if (need > usable_ports(f)) {
            r.fail(fmt::format("{}: {} ABs need {} OCS ports per side, only {} are available", where, abs, need,
                               usable_ports(f)));
        }
    };
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (!actions[i]) continue;
        const std::string where = fmt::format("actions[{}]", i);
        const auto& a = *actions[i];
        if (std::holds_alternative<BuildAction>(a)) {
            if (i != 0) r.fail(where + ": exactly one build action is allowed and it must come first");
            capacity_ok(n, where);
        } else if (const auto* o = std::get_if<OptimizeAction>(&a)) {
            auto it = c.demand_matrices.find(o->demand);
            if (it == c.demand_matrices.end()) {
                r.fail(fmt::format("{}: demand '{}' is not defined", where, o->demand));
            } else if (it->second.size() != n) {
                r.fail(fmt::format("{}: demand '{}' is {}x{} but the fabric has {} ABs at that point", where, o->demand,
                                   it->second.size(), it->second.size(), n));
            }
        } else if (const auto* e = std::get_if<ExpandAction>(&a)) {
            for (const auto& g : e->generations) {
                if (!f.generation_table.find(g)) r.fail(fmt::format("{}: generation '{}' is not defined", where, g));
            }
            n += e->new_abs;
            capacity_ok(n, where);
        } else if (const auto* fa = std::get_if<FailAction>(&a)) {
            const auto& t = fa->target;
            const auto& L = f.layout;
            const bool zone_ok = t.zone >= 0 && t.zone < L.zones;
            switch (t.kind) {
                case FailureTarget::Kind::Zone:
                case FailureTarget::Kind::PowerFeed:
                    if (!zone_ok) r.fail(fmt::format("{}: zone {} does not exist", where, t.zone));
                    break;
                case FailureTarget::Kind::Rack:
                    if (!zone_ok || t.rack < 0 || t.rack >= L.racks_per_zone) {
                        r.fail(fmt::format("{}: zone {} rack {} does not exist", where, t.zone, t.rack));
                    }
                    break;
                case FailureTarget::Kind::Ocs:
                    if (t.ocs < 0 || t.ocs >= f.ocs_count) r.fail(fmt::format("{}: OCS {} does not exist", where, t.ocs));
                    break;
            }
        }
    }
}

}  // namespace

ParseResult parse_config(const Json& doc) {
    ParseResult out;
    Reader r(out.violations);
    if (!doc.is_object()) {
        r.fail("config must be a JSON object");
        return out;
    }
    r.known_keys(doc, "", {"seed", "device_profile", "generation_table", "link", "fabric", "demand_matrices", "actions"});

    ScenarioConfig c;
    c.config_hash = fnv1a64(doc.dump());
    if (const Json* s = r.field(doc, "seed", "", false)) {
        if (s->is_number_unsigned() || (s->is_number_integer() && s->get<long long>() >= 0)) {
            c.seed = s->get<std::uint64_t>();
        } else {
            r.fail("seed must be a non-negative integer");
        }
    } else {
        r.fail("seed required");
    }
    c.fabric.seed = c.seed;

    if (const Json* d = r.field(doc, "device_profile", "", false)) read_device_profile(r, *d, c.fabric.device);
    if (const Json* g = r.field(doc, "generation_table", "", false)) {
        if (!g->is_array() || g->empty()) {
            r.fail("generation_table must be a non-empty array");
        } else {
            std::vector<TransceiverGeneration> gens;
            std::set<std::string> names;
            for (std::size_t i = 0; i < g->size(); ++i) {
                if (auto gen = read_generation(r, (*g)[i], fmt::format("generation_table[{}]", i))) {
                    if (!names.insert(gen->name).second) {
                        r.fail(fmt::format("generation_table[{}]: name '{}' is defined twice", i, gen->name));
                    }
                    gens.push_back(std::move(*gen));
                }
            }
            c.fabric.generation_table = GenerationTable(std::move(gens));
        }
    }
    if (const Json* l = r.field(doc, "link", "", false)) read_link_options(r, *l, c.fabric.optics);
    if (const Json* f = r.field(doc, "fabric", "", true)) {
        read_fabric(r, *f, c.fabric);
        for (const auto& p : c.fabric.validate()) r.fail("fabric: " + p);
    }
    if (const Json* dm = r.field(doc, "demand_matrices", "", false)) {
        if (r.object(*dm, "demand_matrices")) {
            for (auto it = dm->begin(); it != dm->end(); ++it) {
                if (auto m = read_demand(r, it.key(), it.value())) c.demand_matrices.emplace(it.key(), std::move(*m));
            }
        }
    }
    if (const Json* acts = r.field(doc, "actions", "", true)) {
        if (!acts->is_array()) {
            r.fail("actions must be an array");
        } else {
            std::vector<std::optional<Action>> parsed;
            for (std::size_t i = 0; i < acts->size(); ++i) parsed.push_back(read_action(r, (*acts)[i], fmt::format("actions[{}]", i)));
            check_action_sequence(r, c, parsed);
            for (auto& a : parsed) {
                if (a) c.actions.push_back(std::move(*a));
            }
        }
    }
    if (out.violations.empty()) out.config = std::move(c);
    return out;
}

ParseResult parse_config_text(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        ParseResult r;
        r.violations.push_back(fmt::format("config is not valid JSON: {}", e.what()));
        return r;
    }
    return parse_config(doc);
}

ParseResult parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        ParseResult r;
        r.violations.push_back(fmt::format("cannot read config file '{}'", path));
        return r;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::vector<LimitCheck> limit_checks(const Fabric& fabric) {
    double il = 0.0;
    double rl = -std::numeric_limits<double>::infinity();
    double worst_power = 0.0;
    for (const auto& slot : fabric.ocses()) {
        const auto& dev = slot.device;
        il = std::max(il, dev.calibration().max_insertion_loss_db());
        rl = std::max(rl, dev.calibration().max_return_loss_db());
        const auto& p = dev.profile();
        worst_power = std::max(worst_power, p.base_power_w + p.per_connection_power_w * p.radix);
    }
    const auto& p = fabric.config().device;
    return {
        {"insertion_loss_max_db", round_sig(il), p.il_max_db, il <= p.il_max_db},
        {"return_loss_max_db", round_sig(rl), p.rl_spec_db, rl <= p.rl_spec_db},
        {"power_worst_case_w", round_sig(worst_power), p.max_power_w, worst_power <= p.max_power_w},
    };
}

namespace {

Json loss_histogram(const Fabric& fabric) {
    constexpr double kBin = 0.1;
    const auto& p = fabric.config().device;
    const double start = std::floor(p.il_min_db / kBin + 1e-9) * kBin;
    const int bins = std::max(1, static_cast<int>(std::ceil((p.il_max_db - start) / kBin - 1e-9)));
    std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    long long total = 0;
    for (const auto& slot : fabric.ocses()) {
        for (const auto& e : slot.device.calibration().entries()) {
            const double v = e.insertion_loss_db;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            const int b = std::clamp(static_cast<int>(std::floor((v - start) / kBin)), 0, bins - 1);
            ++counts[static_cast<std::size_t>(b)];
            ++total;
        }
    }
    return {{"start_db", number_json(start)}, {"bin_width_db", kBin}, {"counts", counts},
            {"entries", total},               {"min_db", number_json(lo)}, {"max_db", number_json(hi)}};
}

Json run_build(Fabric& fabric, const ScenarioConfig& c) {
    fabric = Fabric::build(c.fabric);
    const auto rep = fabric.realization_report();
    const auto layout = fabric.layout_report();
    Json zones = Json::array();
    for (const auto& z : layout.zones) {
        zones.push_back({{"zone", z.zone}, {"ocs_count", z.ocs_count}, {"ocs_per_rack", z.ocs_per_rack},
                         {"power_w", number_json(z.power_w)}, {"worst_case_power_w", number_json(z.worst_case_power_w)}});
    }
    return {{"links", rep.links},
            {"ocs_ports_used", rep.ocs_ports_used},
            {"fibers_used", rep.fibers_used},
            {"links_per_ocs", rep.links_per_ocs},
            {"capacity_gbps", number_json(fabric.released_capacity_gbps())},
            {"striping", striping_to_json(fabric.striping())},
            {"zones", std::move(zones)},
            {"total_power_w", number_json(layout.total_power_w)}};
}

Json run_optimize(Fabric& fabric, const ScenarioConfig& c, const OptimizeAction& a) {
    const auto& demand = c.demand_matrices.at(a.demand);
    const auto rates = fabric.pair_rates();
    const StripingMatrix before = fabric.striping();
    const double alpha_before = evaluate_throughput(before, rates, demand, a.policy).alpha;
    const StripingMatrix optimized =
        optimize_striping(demand, fabric.n_abs(), fabric.config().uplinks_per_ab, a.policy, rates);
    const double alpha_after = evaluate_throughput(optimized, rates, demand, a.policy).alpha;
    const StripingMatrix canonical = canonical_striping(fabric.n_abs(), fabric.config().uplinks_per_ab);
    const double alpha_canonical = evaluate_throughput(canonical, rates, demand, a.policy).alpha;
    if (a.apply) fabric.realize_striping(optimized);
    return {{"demand", a.demand},
            {"policy", to_string(a.policy)},
            {"alpha_before", number_json(alpha_before)},
            {"alpha_canonical", number_json(alpha_canonical)},
            {"alpha_optimized", number_json(alpha_after)},
            {"links_before", before.total_links()},
            {"links_after", optimized.total_links()},
            {"applied", a.apply},
            {"striping", striping_to_json(optimized)}};
}

Json run_expand(Fabric& fabric, const ScenarioConfig& c, const ExpandAction& a, int index) {
    std::vector<NewAbSpec> specs;
    const std::string fallback = fabric.abs().empty() ? c.fabric.generations.front() : fabric.abs().front().generation;
    for (int i = 0; i < a.new_abs; ++i) {
        std::string g = a.generations.empty()       ? fallback
                        : a.generations.size() == 1 ? a.generations.front()
                                                    : a.generations[static_cast<std::size_t>(i)];
        specs.push_back({g, 0});
    }
    const int n_before = fabric.n_abs();
    const RestripePlan plan = plan_expansion(fabric, specs, a.drain_limit);
    const auto violations = validate_plan(fabric, plan);
    if (!violations.empty()) {
        throw Error(fmt::format("plan failed validation at step {}: {} ({})", violations.front().step,
                                violations.front().kind, violations.front().detail));
    }
    ExecuteOptions opts;
    opts.flake_probability = a.flake;
    opts.retries = a.retries;
    opts.bert_seconds = a.bert_seconds;
    const EventLog log =
        execute_plan(fabric, plan, derive_seed(c.seed, 0xE7A, static_cast<std::uint64_t>(index)), opts);

    Json steps = Json::array();
    for (const auto& s : plan.steps) {
        steps.push_back({{"drain", s.links_to_drain.size()}, {"connect", s.links_to_qualify.size()},
                         {"ocs_ops", s.ocs_ops.size()}});
    }
    double min_released = plan.source_capacity_gbps;
    int retries = 0;
    Json events = Json::array();
    for (const auto& e : log.events) {
        min_released = std::min(min_released, e.released_gbps);
        if (e.from == e.to) ++retries;
        events.push_back({{"t_virtual_s", number_json(e.t_virtual_s)},
                          {"step", e.step},
                          {"link_id", e.link_id ? Json(*e.link_id) : Json(nullptr)},
                          {"transition", to_string(e.from) + "->" + to_string(e.to)},
                          {"detail", e.detail}});
    }
    Json spare = Json::object();
    for (const auto& [ocs, n] : log.spare_moves_per_ocs) spare[std::to_string(ocs)] = n;
    const bool floor_ok = log.floor_violations().empty();
    return {{"abs_before", n_before},
            {"abs_after", fabric.n_abs()},
            {"drain_limit", number_json(a.drain_limit)},
            {"steps", std::move(steps)},
            {"capacity_before_gbps", number_json(plan.source_capacity_gbps)},
            {"capacity_floor_gbps", number_json(plan.capacity_floor_gbps())},
            {"min_released_gbps", number_json(min_released)},
            {"capacity_after_gbps", number_json(fabric.released_capacity_gbps())},
            {"floor_respected", floor_ok},
            {"halted", log.halted},
            {"retries", retries},
            {"failed_links", log.failed_links},
            {"spare_moves_per_ocs", std::move(spare)},
            {"monotone", check_monotone(log).empty()},
            {"matches_target", fabric.striping() == plan.target},
            {"striping", striping_to_json(fabric.striping())},
            {"events", std::move(events)}};
}

Json run_fail(const Fabric& fabric, const FailAction& a) {
    const auto impact = fabric.failure_impact(a.target);
    Json pairs = Json::array();
    for (const auto& [x, y] : impact.affected_ab_pairs) pairs.push_back({x, y});
    return {{"target", to_string(a.target)},
            {"capacity_lost_fraction", number_json(impact.capacity_lost_fraction)},
            {"links_lost", impact.links_lost},
            {"links_total", impact.links_total},
            {"affected_ab_pairs", std::move(pairs)}};
}

Json run_report(const Fabric& fabric) {
    double min_margin = std::numeric_limits<double>::infinity();
    double max_delay = 0.0;
    for (const auto& [id, l] : fabric.links()) {
        const auto path = fabric.link_path(id);
        const auto rate = fabric.pair_rate(l.ab_a, l.ab_b);
        max_delay = std::max(max_delay, propagation_delay_ns(path));
        if (!rate.compatible) continue;
        try {
            min_margin = std::min({min_margin, link_budget(path, rate).margin_db, link_budget(path.reversed(), rate).margin_db});
        } catch (const Error&) {
            min_margin = -std::numeric_limits<double>::infinity();
        }
    }
    Json checks = Json::array();
    for (const auto& c : limit_checks(fabric)) {
        checks.push_back({{"name", c.name}, {"value", number_json(c.value)}, {"limit", number_json(c.limit)}, {"pass", c.pass}});
    }
    return {{"insertion_loss_histogram", loss_histogram(fabric)},
            {"links", fabric.links().size()},
            {"capacity_gbps", number_json(fabric.released_capacity_gbps())},
            {"min_link_margin_db", number_json(min_margin)},
            {"max_propagation_delay_ns", number_json(max_delay)},
            {"striping", striping_to_json(fabric.striping())},
            {"checks", std::move(checks)}};
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& config) {
    RunReport report;
    report.seed = config.seed;
    report.config_hash = config.config_hash;
    Fabric fabric;
    bool built = false;
    for (std::size_t i = 0; i < config.actions.size(); ++i) {
        const auto& action = config.actions[i];
        const int index = static_cast<int>(i);
        try {
            Json result;
            if (std::holds_alternative<BuildAction>(action)) {
                result = run_build(fabric, config);
                built = true;
            } else if (!built) {
                throw Error("the fabric has not been built");
            } else if (const auto* o = std::get_if<OptimizeAction>(&action)) {
                result = run_optimize(fabric, config, *o);
            } else if (const auto* e = std::get_if<ExpandAction>(&action)) {
                result = run_expand(fabric, config, *e, index);
            } else if (const auto* f = std::get_if<FailAction>(&action)) {
                result = run_fail(fabric, *f);
            } else {
                result = run_report(fabric);
            }
            report.actions.push_back({index, action_type(action), std::move(result)});
        } catch (const std::exception& e) {
            report.aborted = true;
            report.aborted_action = index;
            report.abort_cause = e.what();
            break;
        }
    }
    if (built) {
        report.checks = limit_checks(fabric);
        report.fabric = fabric_to_json(fabric);
    }
    return report;
}

Json RunReport::to_json() const {
    Json acts = Json::array();
    for (const auto& a : actions) acts.push_back({{"index", a.index}, {"type", a.type}, {"result", a.result}});
    Json cs = Json::array();
    for (const auto& c : checks) {
        cs.push_back({{"name", c.name}, {"value", number_json(c.value)}, {"limit", number_json(c.limit)}, {"pass", c.pass}});
    }
    Json abort = nullptr;
    if (aborted) abort = {{"action", aborted_action ? Json(*aborted_action) : Json(nullptr)}, {"cause", abort_cause}};
    return {{"schema", kReportSchema},
            {"stamp", {{"seed", seed}, {"config_hash", fmt::format("{:016x}", config_hash)}}},
            {"aborted", aborted},
            {"abort", std::move(abort)},
            {"actions", std::move(acts)},
            {"checks", std::move(cs)},
            {"fabric", fabric}};
}

RunReport RunReport::from_json(const Json& j) {
    if (j.at("schema").get<std::string>() != kReportSchema) throw ConfigInvalid("unsupported report schema");
    RunReport r;
    r.seed = j.at("stamp").at("seed").get<std::uint64_t>();
    r.config_hash = std::stoull(j.at("stamp").at("config_hash").get<std::string>(), nullptr, 16);
    r.aborted = j.at("aborted").get<bool>();
    if (r.aborted) {
        const auto& a = j.at("abort");
        if (!a.at("action").is_null()) r.aborted_action = a.at("action").get<int>();
        r.abort_cause = a.at("cause").get<std::string>();
    }
    for (const auto& a : j.at("actions")) r.actions.push_back({a.at("index").get<int>(), a.at("type").get<std::string>(), a.at("result")});
    for (const auto& c : j.at("checks")) {
        r.checks.push_back({c.at("name").get<std::string>(), number_from_json(c.at("value")),
                            number_from_json(c.at("limit")), c.at("pass").get<bool>()});
    }
    r.fabric = j.at("fabric");
    return r;
}

namespace {

std::string fmt_num(const Json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    return fmt::format("{:.6g}", j.get<double>());
}

std::string text_line(const ActionOutput& a) {
    const Json& r = a.result;
    if (a.type == "build") {
        return fmt::format("[{}] build: {} links, {} OCS ports, {} fibers, capacity {} Gb/s", a.index, fmt_num(r["links"]),
                           fmt_num(r["ocs_ports_used"]), fmt_num(r["fibers_used"]), fmt_num(r["capacity_gbps"]));
    }
    if (a.type == "optimize") {
        return fmt::format("[{}] optimize {} ({}): alpha {} -> {} (canonical {}), links {} -> {}", a.index,
                           r["demand"].get<std::string>(), r["policy"].get<std::string>(), fmt_num(r["alpha_before"]),
                           fmt_num(r["alpha_optimized"]), fmt_num(r["alpha_canonical"]), fmt_num(r["links_before"]),
                           fmt_num(r["links_after"]));
    }
    if (a.type == "expand") {
        return fmt::format(
            "[{}] expand {} -> {} ABs: {} steps, {} retries, {} failed links; capacity floor {} Gb/s, min released {} "
            "Gb/s ({}){}",
            a.index, fmt_num(r["abs_before"]), fmt_num(r["abs_after"]), r["steps"].size(), fmt_num(r["retries"]),
            r["failed_links"].size(), fmt_num(r["capacity_floor_gbps"]), fmt_num(r["min_released_gbps"]),
            r["floor_respected"].get<bool>() ? "PASS" : "FAIL", r["halted"].get<bool>() ? ", halted" : "");
    }
    if (a.type == "fail") {
        return fmt::format("[{}] fail {}: {} of capacity lost ({} of {} links)", a.index, r["target"].get<std::string>(),
                           fmt_num(r["capacity_lost_fraction"]), fmt_num(r["links_lost"]), fmt_num(r["links_total"]));
    }
    return fmt::format("[{}] report: {} links, capacity {} Gb/s, min link margin {} dB, max IL {} dB", a.index,
                       fmt_num(r["links"]), fmt_num(r["capacity_gbps"]), fmt_num(r["min_link_margin_db"]),
                       fmt_num(r["insertion_loss_histogram"]["max_db"]));
}

}  // namespace

std::string emit_report(const RunReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) return report.to_json().dump(2) + "\n";
    std::string out = fmt::format("ocsfab report: seed {}, config {:016x}\n", report.seed, report.config_hash);
    for (const auto& a : report.actions) out += text_line(a) + "\n";
    for (const auto& c : report.checks) {
        out += fmt::format("{} {} = {:.6g} (limit {:.6g})\n", c.pass ? "PASS" : "FAIL", c.name, c.value, c.limit);
    }
    if (report.aborted) {
        out += fmt::format("ABORTED at action {}: {}\n", report.aborted_action ? std::to_string(*report.aborted_action) : "?",
                           report.abort_cause);
    }
    return out;
}

}  // namespace ocsfab
