#include "ocsfab/report_format.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include <fmt/format.h>

namespace ocsfab {

double round_sig(double v, int digits) {
    if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
    const std::string text = fmt::format("{:.{}e}", v, digits - 1);
    return std::strtod(text.c_str(), nullptr);
}

Json number_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return round_sig(v);
}

double number_from_json(const Json& j) {
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

Json striping_to_json(const StripingMatrix& s) {
    Json rows = Json::array();
    for (int a = 0; a < s.size(); ++a) {
        Json row = Json::array();
        for (int b = 0; b < s.size(); ++b) row.push_back(s.at(a, b));
        rows.push_back(std::move(row));
    }
    return rows;
}

StripingMatrix striping_from_json(const Json& j) {
    const int n = static_cast<int>(j.size());
    StripingMatrix s(n);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) s.set(a, b, j.at(a).at(b).get<int>());
    }
    return s;
}

Json fabric_to_json(const Fabric& fabric) {
    Json abs = Json::array();
    for (const auto& ab : fabric.abs()) {
        abs.push_back({{"id", ab.id}, {"generation", ab.generation}, {"uplinks", ab.uplink_count},
                       {"assigned", ab.assigned()}});
    }
    Json ocses = Json::array();
    for (const auto& slot : fabric.ocses()) {
        ocses.push_back({{"id", slot.id},
                         {"zone", slot.placement.zone},
                         {"rack", slot.placement.rack},
                         {"slot", slot.placement.slot},
                         {"connections", slot.device.connection_count()},
                         {"power_w", number_json(slot.device.power_draw_w())}});
    }
    Json links = Json::array();
    for (const auto& [id, l] : fabric.links()) {
        Json link{{"id", id},       {"ab_a", l.ab_a}, {"ab_b", l.ab_b},
                  {"uplink_a", l.uplink_a}, {"uplink_b", l.uplink_b}, {"ocs", l.ocs},
                  {"in", l.forward.in_port}, {"out", l.forward.out_port}};
        if (l.reverse) {
            link["reverse_in"] = l.reverse->in_port;
            link["reverse_out"] = l.reverse->out_port;
        }
        links.push_back(std::move(link));
    }
    const auto rep = fabric.realization_report();
    return {{"schema", kFabricSchema},
            {"mode", fabric.config().mode == LinkMode::Circulator ? "circulator" : "duplex_pair"},
            {"revision", fabric.revision()},
            {"abs", std::move(abs)},
            {"ocses", std::move(ocses)},
            {"striping", striping_to_json(fabric.striping())},
            {"links", std::move(links)},
            {"ocs_ports_used", rep.ocs_ports_used},
            {"fibers_used", rep.fibers_used},
            {"capacity_gbps", number_json(fabric.released_capacity_gbps())}};
}

}  // namespace ocsfab
