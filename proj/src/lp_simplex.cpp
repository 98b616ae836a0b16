#include "ocsfab/lp_simplex.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ocsfab::lp {

Solution maximize(const std::vector<std::vector<double>>& A, const std::vector<double>& b, const std::vector<double>& c) {
    constexpr double kEps = 1e-12;
    const std::size_t m = A.size();
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (A[i].size() != n) throw std::invalid_argument("lp: ragged constraint matrix");
        if (b[i] < 0.0) throw std::invalid_argument("lp: negative right-hand side");
    }

    // Columns: n structural, m slack, then rhs.
    const std::size_t width = n + m + 1;
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(width, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) t[i][j] = A[i][j];
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
        basis[i] = n + i;
    }
    for (std::size_t j = 0; j < n; ++j) t[m][j] = -c[j];

    for (;;) {
        std::size_t enter = width;
        for (std::size_t j = 0; j + 1 < width; ++j) {
            if (t[m][j] < -kEps) {
                enter = j;
                break;
            }
        }
        if (enter == width) break;

        std::size_t leave = m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            if (t[i][enter] <= kEps) continue;
            const double ratio = t[i][width - 1] / t[i][enter];
            if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && basis[i] < basis[leave])) {
                best = ratio;
                leave = i;
            }
        }
        if (leave == m) return {Status::Unbounded, std::numeric_limits<double>::infinity(), {}};

        const double pivot = t[leave][enter];
        for (double& v : t[leave]) v /= pivot;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave || t[i][enter] == 0.0) continue;
            const double f = t[i][enter];
            for (std::size_t j = 0; j < width; ++j) t[i][j] -= f * t[leave][j];
        }
        basis[leave] = enter;
    }

    Solution s;
    s.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] < n) s.x[basis[i]] = t[i][width - 1];
    }
    s.objective = t[m][width - 1];
    return s;
}

}  // namespace ocsfab::lp
