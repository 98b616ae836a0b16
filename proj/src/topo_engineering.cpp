#include "ocsfab/topo_engineering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ocsfab/lp_simplex.hpp"

namespace ocsfab {

DemandMatrix::DemandMatrix(int n, std::vector<double> row_major) : n_(n), gbps_(std::move(row_major)) {
    if (n < 0 || gbps_.size() != static_cast<std::size_t>(n) * n) {
        throw ConfigInvalid(fmt::format("demand matrix needs {} entries, got {}", n * n, gbps_.size()));
    }
}

double DemandMatrix::total() const { return std::accumulate(gbps_.begin(), gbps_.end(), 0.0); }

std::vector<std::string> DemandMatrix::validate() const {
    std::vector<std::string> problems;
    if (gbps_.size() != static_cast<std::size_t>(n_) * n_) {
        problems.push_back(fmt::format("expected {}x{} entries, got {}", n_, n_, gbps_.size()));
        return problems;
    }
    for (int s = 0; s < n_; ++s) {
        for (int d = 0; d < n_; ++d) {
            const double v = at(s, d);
            if (!std::isfinite(v)) {
                problems.push_back(fmt::format("cell [{}][{}] is not finite", s, d));
            } else if (v < 0.0) {
                problems.push_back(fmt::format("cell [{}][{}] is negative ({})", s, d, v));
            } else if (s == d && v != 0.0) {
                problems.push_back(fmt::format("cell [{}][{}] is on the diagonal and must be 0", s, d));
            }
        }
    }
    return problems;
}

RateMatrix uniform_rates(int n, double gbps) {
    RateMatrix r(n, std::vector<double>(n, gbps));
    for (int i = 0; i < n; ++i) r[i][i] = 0.0;
    return r;
}

std::string to_string(RoutingPolicy p) { return p == RoutingPolicy::Ecmp ? "ecmp" : "wcmp"; }

Disconnected::Disconnected(int s, int d)
    : Error(fmt::format("no admissible path from AB {} to AB {}", s, d)), src(s), dst(d) {}

namespace {

struct Commodity {
    int src;
    int dst;
    double demand;
};

void check_shapes(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand) {
    const int n = striping.size();
    if (demand.size() != n) {
        throw ConfigInvalid(fmt::format("demand is {}x{} but the fabric has {} ABs", demand.size(), demand.size(), n));
    }
    if (static_cast<int>(rates.size()) != n) throw ConfigInvalid("rate matrix size does not match striping");
    for (const auto& row : rates) {
        if (static_cast<int>(row.size()) != n) throw ConfigInvalid("rate matrix size does not match striping");
    }
    const auto problems = demand.validate();
    if (!problems.empty()) throw ConfigInvalid("invalid demand: " + problems.front());
}

std::vector<double> capacities(const StripingMatrix& striping, const RateMatrix& rates) {
    const int n = striping.size();
    std::vector<double> cap(static_cast<std::size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a != b) cap[static_cast<std::size_t>(a) * n + b] = striping.at(a, b) * rates[a][b];
        }
    }
    return cap;
}

std::vector<Commodity> commodities(const DemandMatrix& demand) {
    std::vector<Commodity> out;
    for (int s = 0; s < demand.size(); ++s) {
        for (int d = 0; d < demand.size(); ++d) {
            if (s != d && demand.at(s, d) > 0.0) out.push_back({s, d, demand.at(s, d)});
        }
    }
    return out;
}

// Upper bound from per-AB egress and ingress capacity.
double alpha_upper_bound(int n, const std::vector<double>& cap, const std::vector<Commodity>& cs) {
    std::vector<double> out_cap(n, 0.0), in_cap(n, 0.0), out_dem(n, 0.0), in_dem(n, 0.0);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            out_cap[a] += cap[static_cast<std::size_t>(a) * n + b];
            in_cap[b] += cap[static_cast<std::size_t>(a) * n + b];
        }
    }
    for (const auto& c : cs) {
        out_dem[c.src] += c.demand;
        in_dem[c.dst] += c.demand;
    }
    double hi = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
        if (out_dem[a] > 0.0) hi = std::min(hi, out_cap[a] / out_dem[a]);
        if (in_dem[a] > 0.0) hi = std::min(hi, in_cap[a] / in_dem[a]);
    }
    return hi;
}

bool wcmp_feasible(int n, const std::vector<double>& cap, const std::vector<Commodity>& cs, double alpha,
                   std::vector<PathFlow>* flows) {
    constexpr int kQuanta = 32;
    std::vector<double> res = cap;
    const std::size_t C = cs.size();
    std::vector<double> rem(C), quantum(C), tol(C);
    std::vector<double> via_flow(C * static_cast<std::size_t>(n), 0.0);
    std::vector<double> direct(C, 0.0);
    auto at = [n](int a, int b) { return static_cast<std::size_t>(a) * n + b; };

    for (std::size_t i = 0; i < C; ++i) {
        const auto& c = cs[i];
        const double need = alpha * c.demand;
        const double f = std::min(need, res[at(c.src, c.dst)]);
        res[at(c.src, c.dst)] -= f;
        direct[i] = f;
        rem[i] = need - f;
        quantum[i] = rem[i] / kQuanta;
        tol[i] = 1e-9 * need;
    }

    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t i = 0; i < C; ++i) {
            if (rem[i] <= tol[i]) continue;
            const auto& c = cs[i];
            int best_k = -1;
            double best = 0.0;
            for (int k = 0; k < n; ++k) {
                if (k == c.src || k == c.dst) continue;
                const double b = std::min(res[at(c.src, k)], res[at(k, c.dst)]);
                if (b > best) {
                    best = b;
                    best_k = k;
                }
            }
            if (best_k < 0 || best <= 1e-12 * alpha * c.demand) continue;
            double push = std::min({rem[i], best, std::max(quantum[i], tol[i])});
            const bool saturates = push >= best;
            res[at(c.src, best_k)] -= push;
            res[at(best_k, c.dst)] -= push;
            if (saturates) {
                for (auto e : {at(c.src, best_k), at(best_k, c.dst)}) {
                    if (res[e] <= 1e-12 * std::max(1.0, cap[e])) res[e] = 0.0;
                }
            }
            rem[i] -= push;
            via_flow[i * n + best_k] += push;
            progress = true;
        }
    }

    for (std::size_t i = 0; i < C; ++i) {
        if (rem[i] > tol[i]) return false;
    }
    if (flows != nullptr) {
        flows->clear();
        for (std::size_t i = 0; i < C; ++i) {
            if (direct[i] > 0.0) flows->push_back({cs[i].src, cs[i].dst, kDirect, direct[i]});
            for (int k = 0; k < n; ++k) {
                if (via_flow[i * n + k] > 0.0) flows->push_back({cs[i].src, cs[i].dst, k, via_flow[i * n + k]});
            }
        }
    }
    return true;
}

struct CandidatePath {
    int via;
    std::size_t e1;
    std::size_t e2;  // == e1 for the direct path
};

// Frank-Wolfe on a log-sum-exp smoothing of the maximum link utilization,
// restricted to the same direct and one-transit paths. Starts from `start`
// where it routes a commodity, else from a bottleneck-proportional split.
ThroughputResult refine_wcmp(int n, const std::vector<double>& cap, const std::vector<Commodity>& cs,
                             const ThroughputResult& start) {
    constexpr std::array<double, 5> kSharpness{16.0, 64.0, 256.0, 1024.0, 4096.0};
    constexpr int kIterations = 80;
    constexpr int kLineSearch = 24;
    constexpr int kStallLimit = 12;
    auto at = [n](int a, int b) { return static_cast<std::size_t>(a) * n + b; };
    const std::size_t C = cs.size();
    const std::size_t E = cap.size();

    std::vector<std::vector<CandidatePath>> paths(C);
    std::vector<std::vector<double>> x(C);
    for (std::size_t i = 0; i < C; ++i) {
        const auto& c = cs[i];
        if (cap[at(c.src, c.dst)] > 0.0) paths[i].push_back({kDirect, at(c.src, c.dst), at(c.src, c.dst)});
        for (int k = 0; k < n; ++k) {
            if (k == c.src || k == c.dst || cap[at(c.src, k)] <= 0.0 || cap[at(k, c.dst)] <= 0.0) continue;
            paths[i].push_back({k, at(c.src, k), at(k, c.dst)});
        }
        if (paths[i].empty()) return {};
        x[i].assign(paths[i].size(), 0.0);
    }

    if (start.alpha > 0.0) {
        std::vector<double> per(C, 0.0);
        for (const auto& f : start.flows) {
            for (std::size_t i = 0; i < C; ++i) {
                if (cs[i].src != f.src || cs[i].dst != f.dst) continue;
                for (std::size_t p = 0; p < paths[i].size(); ++p) {
                    if (paths[i][p].via == f.via) x[i][p] += f.gbps;
                }
                per[i] += f.gbps;
            }
        }
        for (std::size_t i = 0; i < C; ++i) {
            if (per[i] <= 0.0) continue;
            for (auto& v : x[i]) v /= per[i];
        }
    }
    for (std::size_t i = 0; i < C; ++i) {
        if (std::accumulate(x[i].begin(), x[i].end(), 0.0) > 0.0) continue;
        double sum = 0.0;
        for (std::size_t p = 0; p < paths[i].size(); ++p) {
            x[i][p] = std::min(cap[paths[i][p].e1], cap[paths[i][p].e2]);
            sum += x[i][p];
        }
        for (auto& v : x[i]) v /= sum;
    }

    auto loads_of = [&](const std::vector<std::vector<double>>& xs, std::vector<double>& load) {
        std::fill(load.begin(), load.end(), 0.0);
        for (std::size_t i = 0; i < C; ++i) {
            for (std::size_t p = 0; p < paths[i].size(); ++p) {
                const double f = cs[i].demand * xs[i][p];
                load[paths[i][p].e1] += f;
                if (paths[i][p].e2 != paths[i][p].e1) load[paths[i][p].e2] += f;
            }
        }
    };
    auto max_util = [&](const std::vector<double>& load) {
        double u = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            if (load[e] > 0.0) u = std::max(u, cap[e] > 0.0 ? load[e] / cap[e] : std::numeric_limits<double>::infinity());
        }
        return u;
    };
    auto smooth = [&](const std::vector<double>& load, double beta, double shift) {
        double s = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            if (cap[e] > 0.0) s += std::exp(beta * (load[e] / cap[e] - shift));
        }
        return std::log(s) / beta + shift;
    };

    std::vector<double> load(E), target(E), trial(E), weight(E);
    loads_of(x, load);
    double best_util = max_util(load);
    auto best_x = x;

    std::vector<std::size_t> choice(C);
    for (double sharpness : kSharpness) {
        double stage_best = best_util;
        int stalled = 0;
        for (int it = 0; it < kIterations && stalled < kStallLimit; ++it) {
            const double u = max_util(load);
            if (!(u > 0.0) || !std::isfinite(u)) break;
            const double beta = sharpness / u;
            for (std::size_t e = 0; e < E; ++e) {
                weight[e] = cap[e] > 0.0 ? std::exp(beta * (load[e] / cap[e] - u)) / cap[e] : 0.0;
            }
            std::fill(target.begin(), target.end(), 0.0);
            for (std::size_t i = 0; i < C; ++i) {
                std::size_t best = 0;
                double best_len = std::numeric_limits<double>::infinity();
                for (std::size_t p = 0; p < paths[i].size(); ++p) {
                    const auto& path = paths[i][p];
                    const double len = path.e1 == path.e2 ? weight[path.e1] : weight[path.e1] + weight[path.e2];
                    if (len < best_len) {
                        best_len = len;
                        best = p;
                    }
                }
                choice[i] = best;
                target[paths[i][best].e1] += cs[i].demand;
                if (paths[i][best].e2 != paths[i][best].e1) target[paths[i][best].e2] += cs[i].demand;
            }
            // Golden-section search on the smoothed objective along the segment.
            auto phi = [&](double g) {
                for (std::size_t e = 0; e < E; ++e) trial[e] = (1.0 - g) * load[e] + g * target[e];
                return smooth(trial, beta, u);
            };
            const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
            double lo = 0.0, hi = 1.0;
            double m1 = hi - ratio * (hi - lo), m2 = lo + ratio * (hi - lo);
            double f1 = phi(m1), f2 = phi(m2);
            for (int k = 0; k < kLineSearch; ++k) {
                if (f1 <= f2) {
                    hi = m2;
                    m2 = m1;
                    f2 = f1;
                    m1 = hi - ratio * (hi - lo);
                    f1 = phi(m1);
                } else {
                    lo = m1;
                    m1 = m2;
                    f1 = f2;
                    m2 = lo + ratio * (hi - lo);
                    f2 = phi(m2);
                }
            }
            const double g = 0.5 * (lo + hi);
            if (phi(g) >= phi(0.0)) {
                ++stalled;
                continue;
            }
            for (std::size_t i = 0; i < C; ++i) {
                for (auto& v : x[i]) v *= 1.0 - g;
                x[i][choice[i]] += g;
            }
            for (std::size_t e = 0; e < E; ++e) load[e] = (1.0 - g) * load[e] + g * target[e];
            const double now = max_util(load);
            if (now < best_util) {
                best_util = now;
                best_x = x;
            }
            if (best_util < stage_best * (1.0 - 1e-6)) {
                stage_best = best_util;
                stalled = 0;
            } else {
                ++stalled;
            }
        }
    }

    ThroughputResult r;
    if (!(best_util > 0.0) || !std::isfinite(best_util)) return r;
    r.alpha = 1.0 / best_util;
    for (std::size_t i = 0; i < C; ++i) {
        for (std::size_t p = 0; p < paths[i].size(); ++p) {
            const double f = r.alpha * cs[i].demand * best_x[i][p];
            if (f > 0.0) r.flows.push_back({cs[i].src, cs[i].dst, paths[i][p].via, f});
        }
    }
    return r;
}

ThroughputResult evaluate_wcmp(int n, const std::vector<double>& cap, const std::vector<Commodity>& cs) {
    constexpr int kBisections = 48;
    const double hi_bound = alpha_upper_bound(n, cap, cs);
    ThroughputResult r;
    if (!(hi_bound > 0.0)) return r;
    if (wcmp_feasible(n, cap, cs, hi_bound, &r.flows)) {
        r.alpha = hi_bound;
        return r;
    }
    double lo = 0.0, hi = hi_bound;
    for (int i = 0; i < kBisections; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (wcmp_feasible(n, cap, cs, mid, nullptr)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    r.alpha = lo;
    if (lo > 0.0) wcmp_feasible(n, cap, cs, lo, &r.flows);
    // Greedy filling strands capacity when commodities compete for transit.
    auto refined = refine_wcmp(n, cap, cs, r);
    if (refined.alpha > r.alpha) r = std::move(refined);
    return r;
}

ThroughputResult evaluate_ecmp(const StripingMatrix& striping, const std::vector<double>& cap,
                               const DemandMatrix& demand) {
    const int n = striping.size();
    RoutingWeights weights;
    try {
        weights = ecmp_weights(striping, demand);
    } catch (const Disconnected&) {
        return {};
    }
    std::vector<double> unit_load(static_cast<std::size_t>(n) * n, 0.0);
    auto at = [n](int a, int b) { return static_cast<std::size_t>(a) * n + b; };
    for (const auto& [key, paths] : weights) {
        const double d = demand.at(key.first, key.second);
        for (const auto& p : paths) {
            if (p.via == kDirect) {
                unit_load[at(key.first, key.second)] += d * p.weight;
            } else {
                unit_load[at(key.first, p.via)] += d * p.weight;
                unit_load[at(p.via, key.second)] += d * p.weight;
            }
        }
    }
    ThroughputResult r;
    r.alpha = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < unit_load.size(); ++e) {
        if (unit_load[e] > 0.0) r.alpha = std::min(r.alpha, cap[e] / unit_load[e]);
    }
    for (const auto& [key, paths] : weights) {
        const double d = demand.at(key.first, key.second);
        for (const auto& p : paths) r.flows.push_back({key.first, key.second, p.via, r.alpha * d * p.weight});
    }
    return r;
}

}  // namespace

ThroughputResult evaluate_throughput(const StripingMatrix& striping, const RateMatrix& rates,
                                     const DemandMatrix& demand, RoutingPolicy policy) {
    check_shapes(striping, rates, demand);
    if (demand.is_zero()) return {std::numeric_limits<double>::infinity(), {}};
    const auto cap = capacities(striping, rates);
    if (policy == RoutingPolicy::Ecmp) return evaluate_ecmp(striping, cap, demand);
    return evaluate_wcmp(striping.size(), cap, commodities(demand));
}

std::vector<double> evaluate_throughput_batch_serial(const std::vector<ThroughputCase>& cases) {
    std::vector<double> out(cases.size());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        out[i] = evaluate_throughput(c.striping, c.rates, c.demand, c.policy).alpha;
    }
    return out;
}

std::vector<double> evaluate_throughput_batch_parallel(const std::vector<ThroughputCase>& cases) {
    std::vector<double> out(cases.size());
    const auto count = static_cast<std::ptrdiff_t>(cases.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& c = cases[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = evaluate_throughput(c.striping, c.rates, c.demand, c.policy).alpha;
    }
    return out;
}

std::vector<std::vector<double>> directed_loads(int n, const std::vector<PathFlow>& flows) {
    std::vector<std::vector<double>> load(n, std::vector<double>(n, 0.0));
    for (const auto& f : flows) {
        if (f.via == kDirect) {
            load[f.src][f.dst] += f.gbps;
        } else {
            load[f.src][f.via] += f.gbps;
            load[f.via][f.dst] += f.gbps;
        }
    }
    return load;
}

double throughput_oracle(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand) {
    const int n = striping.size();
    if (n > kOracleMaxAbs || striping.total_links() > kOracleMaxLinks) {
        throw TooLarge(fmt::format("oracle limited to {} ABs and {} links (got {} ABs, {} links)", kOracleMaxAbs,
                                   kOracleMaxLinks, n, striping.total_links()));
    }
    check_shapes(striping, rates, demand);
    if (demand.is_zero()) return std::numeric_limits<double>::infinity();

    const auto cs = commodities(demand);
    struct Var {
        std::size_t commodity;
        int via;
    };
    std::vector<Var> vars;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        vars.push_back({i, kDirect});
        for (int k = 0; k < n; ++k) {
            if (k != cs[i].src && k != cs[i].dst) vars.push_back({i, k});
        }
    }
    // Column 0 is alpha; column j+1 is the flow on vars[j].
    const std::size_t cols = vars.size() + 1;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        std::vector<double> row(cols, 0.0);
        row[0] = cs[i].demand;
        for (std::size_t j = 0; j < vars.size(); ++j) {
            if (vars[j].commodity == i) row[j + 1] = -1.0;
        }
        A.push_back(std::move(row));
        b.push_back(0.0);
    }
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y) {
            if (x == y) continue;
            std::vector<double> row(cols, 0.0);
            bool used = false;
            for (std::size_t j = 0; j < vars.size(); ++j) {
                const auto& c = cs[vars[j].commodity];
                const int v = vars[j].via;
                const bool on_edge = v == kDirect ? (c.src == x && c.dst == y)
                                                  : ((c.src == x && v == y) || (v == x && c.dst == y));
                if (on_edge) {
                    row[j + 1] = 1.0;
                    used = true;
                }
            }
            if (!used) continue;
            A.push_back(std::move(row));
            b.push_back(striping.at(x, y) * rates[x][y]);
        }
    }
    std::vector<double> c(cols, 0.0);
    c[0] = 1.0;
    const auto sol = lp::maximize(A, b, c);
    if (sol.status == lp::Status::Unbounded) return std::numeric_limits<double>::infinity();
    return sol.x[0];
}

RoutingWeights wcmp_weights(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand) {
    check_shapes(striping, rates, demand);
    const int n = striping.size();
    RoutingWeights out;
    for (const auto& c : commodities(demand)) {
        std::vector<PathWeight> paths;
        const double direct = striping.at(c.src, c.dst) * rates[c.src][c.dst];
        if (direct > 0.0) paths.push_back({kDirect, direct});
        for (int k = 0; k < n; ++k) {
            if (k == c.src || k == c.dst) continue;
            const double b = std::min(striping.at(c.src, k) * rates[c.src][k], striping.at(k, c.dst) * rates[k][c.dst]);
            if (b > 0.0) paths.push_back({k, b});
        }
        double sum = 0.0;
        for (const auto& p : paths) sum += p.weight;
        if (sum <= 0.0) throw Disconnected(c.src, c.dst);
        for (auto& p : paths) p.weight /= sum;
        out[{c.src, c.dst}] = std::move(paths);
    }
    return out;
}

RoutingWeights ecmp_weights(const StripingMatrix& striping, const DemandMatrix& demand) {
    const int n = striping.size();
    RoutingWeights out;
    for (const auto& c : commodities(demand)) {
        std::vector<PathWeight> paths;
        if (striping.at(c.src, c.dst) > 0) {
            paths.push_back({kDirect, 1.0});
        } else {
            for (int k = 0; k < n; ++k) {
                if (k == c.src || k == c.dst) continue;
                if (striping.at(c.src, k) > 0 && striping.at(k, c.dst) > 0) paths.push_back({k, 0.0});
            }
            if (paths.empty()) throw Disconnected(c.src, c.dst);
            for (auto& p : paths) p.weight = 1.0 / static_cast<double>(paths.size());
        }
        out[{c.src, c.dst}] = std::move(paths);
    }
    return out;
}

namespace {

struct PairSlack {
    int a;
    int b;
    double slack;
};

std::vector<PairSlack> pair_slacks(const StripingMatrix& s, const RateMatrix& rates, const DemandMatrix& demand,
                                   double alpha) {
    std::vector<PairSlack> out;
    const double scale = std::isfinite(alpha) ? alpha : 0.0;
    for (const auto& [a, b] : s.pairs()) {
        const double cap = s.at(a, b) * rates[a][b];
        out.push_back({a, b, cap - scale * std::max(demand.at(a, b), demand.at(b, a))});
    }
    return out;
}

}  // namespace

namespace {

// One link move toward each of the lowest-slack pairs: take an uplink from a
// high-slack pair at each end (or a free uplink) and pair up the freed ends.
std::vector<StripingMatrix> candidate_moves(const StripingMatrix& s, const RateMatrix& rates,
                                            const DemandMatrix& demand, double alpha, int uplinks_per_ab,
                                            const OptimizeOptions& options) {
    auto slacks = pair_slacks(s, rates, demand, alpha);
    auto targets = slacks;
    std::stable_sort(targets.begin(), targets.end(),
                     [](const PairSlack& l, const PairSlack& r) { return l.slack < r.slack; });
    auto donors_desc = slacks;
    std::stable_sort(donors_desc.begin(), donors_desc.end(),
                     [](const PairSlack& l, const PairSlack& r) { return l.slack > r.slack; });

    auto donors_for = [&](int end, int other) {
        std::vector<int> partners;
        if (s.row_sum(end) < uplinks_per_ab) {
            partners.push_back(-1);
            return partners;
        }
        for (const auto& d : donors_desc) {
            if (static_cast<int>(partners.size()) >= options.donor_candidates) break;
            if (s.at(d.a, d.b) <= 0) continue;
            int partner = -1;
            if (d.a == end) partner = d.b;
            else if (d.b == end) partner = d.a;
            if (partner < 0 || partner == other) continue;
            partners.push_back(partner);
        }
        return partners;
    };

    std::vector<StripingMatrix> out;
    const int tcount = std::min<int>(options.target_candidates, static_cast<int>(targets.size()));
    for (int t = 0; t < tcount; ++t) {
        const int a = targets[t].a;
        const int b = targets[t].b;
        for (int x : donors_for(a, b)) {
            for (int y : donors_for(b, a)) {
                StripingMatrix cand = s;
                if (x >= 0) cand.add(a, x, -1);
                if (y >= 0) cand.add(b, y, -1);
                cand.add(a, b, 1);
                if (x >= 0 && y >= 0 && x != y) cand.add(x, y, 1);
                out.push_back(std::move(cand));
            }
        }
    }
    return out;
}

}  // namespace

StripingMatrix optimize_striping(const DemandMatrix& demand, int n_abs, int uplinks_per_ab, RoutingPolicy policy,
                                 const RateMatrix& rates, const OptimizeOptions& options) {
    StripingMatrix s = canonical_striping(n_abs, uplinks_per_ab);
    if (demand.is_zero()) return s;
    double alpha = evaluate_throughput(s, rates, demand, policy).alpha;
    const auto better = [&](double cand) { return cand > alpha * (1.0 + options.min_relative_gain); };

    for (int move = 0; move < options.max_moves; ++move) {
        bool improved = false;
        std::vector<std::pair<double, StripingMatrix>> scored;
        for (auto& cand : candidate_moves(s, rates, demand, alpha, uplinks_per_ab, options)) {
            const double cand_alpha = evaluate_throughput(cand, rates, demand, policy).alpha;
            if (better(cand_alpha)) {
                s = std::move(cand);
                alpha = cand_alpha;
                improved = true;
                break;
            }
            scored.emplace_back(cand_alpha, std::move(cand));
        }
        // Plateaus: a single move often only pays off together with a second one.
        if (!improved && options.lookahead > 0) {
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& l, const auto& r) { return l.first > r.first; });
            const int first_moves = std::min<int>(options.lookahead, static_cast<int>(scored.size()));
            for (int i = 0; i < first_moves && !improved; ++i) {
                const auto& [mid_alpha, mid] = scored[static_cast<std::size_t>(i)];
                for (auto& cand : candidate_moves(mid, rates, demand, mid_alpha, uplinks_per_ab, options)) {
                    const double cand_alpha = evaluate_throughput(cand, rates, demand, policy).alpha;
                    if (better(cand_alpha)) {
                        s = std::move(cand);
                        alpha = cand_alpha;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if (!improved) break;
    }
    return s;
}

StripingMatrix minimize_links(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand,
                              RoutingPolicy policy, double alpha_target) {
    StripingMatrix s = striping;
    const double floor = alpha_target * (1.0 - 1e-9);
    for (;;) {
        auto slacks = pair_slacks(s, rates, demand, alpha_target);
        std::stable_sort(slacks.begin(), slacks.end(),
                         [](const PairSlack& l, const PairSlack& r) { return l.slack > r.slack; });
        bool removed = false;
        for (const auto& p : slacks) {
            if (s.at(p.a, p.b) <= 0) continue;
            StripingMatrix cand = s;
            cand.add(p.a, p.b, -1);
            if (evaluate_throughput(cand, rates, demand, policy).alpha >= floor) {
                s = std::move(cand);
                removed = true;
                break;
            }
        }
        if (!removed) return s;
    }
}

}  // namespace ocsfab
