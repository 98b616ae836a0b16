#pragma once

#include <vector>

namespace ocsfab::lp {

enum class Status { Optimal, Unbounded };

struct Solution {
    Status status = Status::Optimal;
    double objective = 0.0;
    std::vector<double> x;
};

// maximize c.x subject to A x <= b, x >= 0, with b >= 0 so the origin is a
// basic feasible start. Dense tableau with Bland's rule.
Solution maximize(const std::vector<std::vector<double>>& A, const std::vector<double>& b, const std::vector<double>& c);

}  // namespace ocsfab::lp
