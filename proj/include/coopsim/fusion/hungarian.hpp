#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace coopsim::fusion {

using CostMatrix = Eigen::MatrixXd;
using AssignmentPairs = std::vector<std::pair<int, int>>;

// Minimum-cost assignment (Kuhn-Munkres with potentials, O(N^3)).
//
// Rectangular inputs are padded to square with zero-cost dummy entries.
// +inf entries are forbidden: they are replaced by a sentinel larger than
// any sum of permitted costs, so the solver first maximizes the number of
// permitted pairs and then minimizes their total. Pairs that land on a dummy
// or forbidden entry are dropped from the result.
//
// Among all optimal assignments the lexicographically smallest (row, col)
// list is returned, found by walking the tight-edge subgraph of the optimal
// dual solution. Pairs are sorted by row.
AssignmentPairs hungarian(const CostMatrix& cost);

double assignment_cost(const CostMatrix& cost, const AssignmentPairs& pairs);

}  // namespace coopsim::fusion
