#include "disac/assignment.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace disac {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    Assignment result;
    if (n == 0) return result;
    if (n > m) return result;  // cannot assign every row

    // shortest augmenting path with potentials (1-indexed helpers)
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if (!(delta < kInf)) return Assignment{};  // infeasible
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        while (j0 != 0) {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    result.row_to_col.assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) result.row_to_col[p[j] - 1] = j - 1;
    result.cost = 0.0;
    for (int i = 0; i < n; ++i) result.cost += cost(i, result.row_to_col[i]);
    return result;
}

std::vector<Assignment> kbest_assignments(const Eigen::MatrixXd& cost, int k) {
    std::vector<Assignment> results;
    if (k <= 0 || cost.rows() == 0) return results;

    struct Node {
        Eigen::MatrixXd cost;
        Assignment best;
    };
    auto cmp = [](const Node& a, const Node& b) { return a.best.cost > b.best.cost; };
    std::priority_queue<Node, std::vector<Node>, decltype(cmp)> queue(cmp);

    Assignment root = solve_assignment(cost);
    if (root.row_to_col.empty()) return results;
    queue.push(Node{cost, std::move(root)});

    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());

    while (!queue.empty() && static_cast<int>(results.size()) < k) {
        Node node = queue.top();
        queue.pop();
        results.push_back(node.best);
        if (static_cast<int>(results.size()) >= k) break;

        // Murty partition: child t excludes pair t and fixes pairs 0..t-1
        Eigen::MatrixXd base = node.cost;
        for (int t = 0; t < n; ++t) {
            const int col = node.best.row_to_col[t];
            Eigen::MatrixXd sub = base;
            sub(t, col) = kInf;
            Assignment a = solve_assignment(sub);
            if (!a.row_to_col.empty() && a.cost < kInf) queue.push(Node{sub, std::move(a)});
            // fix (t, col) for the remaining children
            for (int j = 0; j < m; ++j)
                if (j != col) base(t, j) = kInf;
            for (int i = 0; i < n; ++i)
                if (i != t) base(i, col) = kInf;
        }
    }
    return results;
}

}  // namespace disac
