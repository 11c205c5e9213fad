#include "skitb/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skitb/error.hpp"

namespace skitb::sort {

namespace {

struct SquareSolution {
    std::vector<int> col_of_row;
    std::vector<double> u;  // row potentials
    std::vector<double> v;  // column potentials
    double cost = 0.0;
};

// Shortest augmenting path with potentials, O(n^3). Square input.
SquareSolution solve_square(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    SquareSolution s;
    s.col_of_row.assign(n, -1);
    for (int j = 1; j <= n; ++j) {
        if (p[j] != 0) s.col_of_row[p[j] - 1] = j - 1;
    }
    s.u.assign(u.begin() + 1, u.end());
    s.v.assign(v.begin() + 1, v.end());
    for (int i = 0; i < n; ++i) s.cost += a(i, s.col_of_row[i]);
    return s;
}

// Optimal cost over the rows/columns not yet fixed.
double residual_cost(const Eigen::MatrixXd& a, const std::vector<char>& row_fixed, const std::vector<char>& col_fixed) {
    std::vector<int> rows, cols;
    for (int i = 0; i < a.rows(); ++i)
        if (!row_fixed[i]) rows.push_back(i);
    for (int j = 0; j < a.cols(); ++j)
        if (!col_fixed[j]) cols.push_back(j);
    if (rows.empty()) return 0.0;
    Eigen::MatrixXd sub(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) sub(r, c) = a(rows[r], cols[c]);
    return solve_square(sub).cost;
}

}  // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    const auto m = static_cast<std::size_t>(cost.cols());
    if (!cost.allFinite()) fail(ErrorCode::InvalidArgument, "hungarian: cost matrix has non-finite entries");

    Assignment out;
    if (n == 0 || m == 0) {
        for (std::size_t i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
        for (std::size_t j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
        return out;
    }

    const auto k = std::max(n, m);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    a.topLeftCorner(cost.rows(), cost.cols()) = cost;

    const auto base = solve_square(a);
    const double optimum = base.cost;
    const double tol = 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff() * static_cast<double>(k));

    // Fix rows in order, each to the smallest column that still admits an optimal completion.
    // Only edges tight under the optimal potentials can belong to an optimal matching.
    std::vector<char> row_fixed(k, 0), col_fixed(k, 0);
    std::vector<long> col_of_row(n, -1);
    double fixed_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        bool placed = false;
        for (std::size_t j = 0; j < m && !placed; ++j) {
            if (col_fixed[j]) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            if (a(ii, jj) - base.u[i] - base.v[j] > tol) continue;
            row_fixed[i] = col_fixed[j] = 1;
            const double total = fixed_cost + a(ii, jj) + residual_cost(a, row_fixed, col_fixed);
            if (total <= optimum + tol) {
                fixed_cost += a(ii, jj);
                col_of_row[i] = static_cast<long>(j);
                placed = true;
            } else {
                row_fixed[i] = col_fixed[j] = 0;
            }
        }
        if (!placed) {
            // Every optimum leaves this row on a padding column; those are interchangeable.
            for (std::size_t j = m; j < k; ++j) {
                if (!col_fixed[j]) {
                    row_fixed[i] = col_fixed[j] = 1;
                    break;
                }
            }
        }
    }

    std::vector<char> col_used(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (col_of_row[i] < 0) {
            out.unmatched_rows.push_back(i);
            continue;
        }
        const auto j = static_cast<std::size_t>(col_of_row[i]);
        out.matches.emplace_back(i, j);
        out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        col_used[j] = 1;
    }
    for (std::size_t j = 0; j < m; ++j)
        if (!col_used[j]) out.unmatched_cols.push_back(j);
    return out;
}

}  // namespace skitb::sort
