#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace skitb::sort {

struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> matches;  // (row, col), sorted by row
    std::vector<std::size_t> unmatched_rows;
    std::vector<std::size_t> unmatched_cols;
    double cost = 0.0;  // sum of matched entries, accumulated in row order
};

/// Minimum-cost maximal matching of a rectangular cost matrix (implicitly padded to square).
/// Among optimal matchings the lexicographically smallest list of (row, col) pairs is returned.
/// Throws InvalidArgument on non-finite entries.
Assignment hungarian(const Eigen::MatrixXd& cost);

}  // namespace skitb::sort
