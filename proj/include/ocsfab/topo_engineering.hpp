#pragma once

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ocsfab/errors.hpp"
#include "ocsfab/fabric.hpp"

namespace ocsfab {

// Offered inter-AB traffic in Gb/s, row = source.
class DemandMatrix {
public:
    DemandMatrix() = default;
    explicit DemandMatrix(int n) : n_(n), gbps_(static_cast<std::size_t>(n) * n, 0.0) {}
    DemandMatrix(int n, std::vector<double> row_major);

    int size() const { return n_; }
    double at(int src, int dst) const { return gbps_[static_cast<std::size_t>(src) * n_ + dst]; }
    void set(int src, int dst, double gbps) { gbps_[static_cast<std::size_t>(src) * n_ + dst] = gbps; }
    double total() const;
    bool is_zero() const { return total() == 0.0; }
    const std::vector<double>& row_major() const { return gbps_; }
    // Cell-level problems: shape, sign, finiteness, diagonal.
    std::vector<std::string> validate() const;

    bool operator==(const DemandMatrix&) const = default;

private:
    int n_ = 0;
    std::vector<double> gbps_;
};

// Per-link rate for every AB pair, in Gb/s.
using RateMatrix = std::vector<std::vector<double>>;
RateMatrix uniform_rates(int n, double gbps);

enum class RoutingPolicy { Ecmp, Wcmp };
std::string to_string(RoutingPolicy p);

inline constexpr int kDirect = -1;

struct PathFlow {
    int src = 0;
    int dst = 0;
    int via = kDirect;
    double gbps = 0.0;
};

struct ThroughputResult {
    // +inf when there is no demand.
    double alpha = 0.0;
    // Routing of alpha * demand.
    std::vector<PathFlow> flows;
};

// Largest uniform demand scale the striping carries over direct and one-transit
// paths. WCMP routes adaptively (bisection over alpha with a water-filling
// feasibility check); ECMP uses the static equal split.
ThroughputResult evaluate_throughput(const StripingMatrix& striping, const RateMatrix& rates,
                                     const DemandMatrix& demand, RoutingPolicy policy);

struct ThroughputCase {
    StripingMatrix striping;
    RateMatrix rates;
    DemandMatrix demand;
    RoutingPolicy policy = RoutingPolicy::Wcmp;
};

std::vector<double> evaluate_throughput_batch_serial(const std::vector<ThroughputCase>& cases);
std::vector<double> evaluate_throughput_batch_parallel(const std::vector<ThroughputCase>& cases);

// Directed load per AB pair induced by a set of path flows.
std::vector<std::vector<double>> directed_loads(int n, const std::vector<PathFlow>& flows);

class TooLarge : public Error {
public:
    using Error::Error;
};

inline constexpr int kOracleMaxAbs = 4;
inline constexpr int kOracleMaxLinks = 24;

// Exact optimum of the same problem, by linear programming over path flows.
double throughput_oracle(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand);

class Disconnected : public Error {
public:
    Disconnected(int src, int dst);
    int src;
    int dst;
};

struct PathWeight {
    int via = kDirect;
    double weight = 0.0;
};

using RoutingWeights = std::map<std::pair<int, int>, std::vector<PathWeight>>;

// Weights over admissible paths, proportional to each path's bottleneck capacity.
RoutingWeights wcmp_weights(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand);
// All weight on the direct link when one exists, else equal over transit paths.
RoutingWeights ecmp_weights(const StripingMatrix& striping, const DemandMatrix& demand);

struct OptimizeOptions {
    double min_relative_gain = 1e-3;
    int max_moves = 10'000;
    // Candidate breadth per move: lowest-slack targets and highest-slack donors tried.
    int target_candidates = 6;
    int donor_candidates = 4;
    // Best single moves expanded into two-move sequences when no single move helps.
    int lookahead = 16;
};

// Greedy link moves from canonical striping toward the demand.
StripingMatrix optimize_striping(const DemandMatrix& demand, int n_abs, int uplinks_per_ab, RoutingPolicy policy,
                                 const RateMatrix& rates, const OptimizeOptions& options = {});

// Drops links, highest slack first, while alpha stays at or above `alpha_target`.
StripingMatrix minimize_links(const StripingMatrix& striping, const RateMatrix& rates, const DemandMatrix& demand,
                              RoutingPolicy policy, double alpha_target);

}  // namespace ocsfab
