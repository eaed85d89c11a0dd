#pragma once

#include <vector>

#include <Eigen/Dense>

namespace disac {

struct Assignment {
    std::vector<int> row_to_col;  // size = rows, every row assigned
    double cost = 0.0;
};

/// Minimum-cost complete assignment of all rows to distinct columns
/// (rows <= cols). Infinite entries mark forbidden pairs. Returns an empty
/// row_to_col when no feasible assignment exists.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Murty's ranked enumeration: the k lowest-cost complete assignments in
/// nondecreasing cost order, without duplicates. Infeasible problems yield an
/// empty list.
std::vector<Assignment> kbest_assignments(const Eigen::MatrixXd& cost, int k);

}  // namespace disac
