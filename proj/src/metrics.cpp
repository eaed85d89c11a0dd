#include "disac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace disac {

namespace {

struct StepCost {
    double loc = 0.0;
    double missed = 0.0;
    double falsec = 0.0;
    double total() const { return loc + missed + falsec; }
};

void enumerate_maps(int n_t, int n_e, std::vector<int>& cur, std::vector<char>& used, int i,
                    std::vector<std::vector<int>>& out) {
    if (i == n_t) {
        out.push_back(cur);
        return;
    }
    cur[i] = -1;
    enumerate_maps(n_t, n_e, cur, used, i + 1, out);
    for (int j = 0; j < n_e; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        cur[i] = j;
        enumerate_maps(n_t, n_e, cur, used, i + 1, out);
        cur[i] = -1;
        used[j] = 0;
    }
}

StepCost step_cost(const std::vector<int>& map, const std::vector<char>& est_assigned,
                   const std::vector<TrajectoryState>& est,
                   const std::vector<TrajectoryState>& truth, int t,
                   const TrajMetricConfig& cfg) {
    StepCost sc;
    const double half_cut = 0.5 * std::pow(cfg.cutoff, cfg.order);
    for (size_t i = 0; i < truth.size(); ++i) {
        const bool te = truth[i].exists_at(t);
        const int j = map[i];
        const bool ee = j >= 0 && est[j].exists_at(t);
        if (te && ee) {
            const double d =
                (truth[i].at_step(t).position() - est[j].at_step(t).position()).norm();
            if (d < cfg.cutoff) {
                sc.loc += std::pow(d, cfg.order);
            } else {
                sc.missed += half_cut;
                sc.falsec += half_cut;
            }
        } else if (te) {
            sc.missed += half_cut;
        } else if (ee) {
            sc.falsec += half_cut;
        }
    }
    for (size_t j = 0; j < est.size(); ++j) {
        if (!est_assigned[j] && est[j].exists_at(t)) sc.falsec += half_cut;
    }
    return sc;
}

double switch_between(const std::vector<int>& prev, const std::vector<int>& cur,
                      const TrajMetricConfig& cfg) {
    const double full = std::pow(cfg.switch_cost, cfg.order);
    double s = 0.0;
    for (size_t i = 0; i < prev.size(); ++i) {
        if (prev[i] == cur[i]) continue;
        s += (prev[i] < 0 || cur[i] < 0) ? 0.5 * full : full;
    }
    return s;
}

}  // namespace

GospaTrace trajectory_gospa_trace(const std::vector<TrajectoryState>& est,
                                  const std::vector<TrajectoryState>& truth, int k,
                                  const TrajMetricConfig& cfg) {
    const int n_t = static_cast<int>(truth.size());
    const int n_e = static_cast<int>(est.size());
    if (n_t > 6 || n_e > 6)
        throw std::invalid_argument("trajectory_gospa: cardinality above 6 unsupported");
    if (k < 1) throw std::invalid_argument("trajectory_gospa: k must be >= 1");

    std::vector<std::vector<int>> maps;
    {
        std::vector<int> cur(n_t, -1);
        std::vector<char> used(n_e, 0);
        enumerate_maps(n_t, n_e, cur, used, 0, maps);
    }
    const int n_maps = static_cast<int>(maps.size());
    std::vector<std::vector<char>> est_assigned(n_maps, std::vector<char>(n_e, 0));
    for (int m = 0; m < n_maps; ++m)
        for (int i = 0; i < n_t; ++i)
            if (maps[m][i] >= 0) est_assigned[m][maps[m][i]] = 1;

    // precomputed switch costs between map pairs
    std::vector<std::vector<double>> sw(n_maps, std::vector<double>(n_maps, 0.0));
    for (int a = 0; a < n_maps; ++a)
        for (int b = 0; b < n_maps; ++b) sw[a][b] = switch_between(maps[a], maps[b], cfg);

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(n_maps), next(n_maps);
    std::vector<std::vector<int>> parent(k, std::vector<int>(n_maps, -1));

    for (int m = 0; m < n_maps; ++m)
        dp[m] = step_cost(maps[m], est_assigned[m], est, truth, 1, cfg).total();

    for (int t = 2; t <= k; ++t) {
        for (int m = 0; m < n_maps; ++m) {
            double best = kInf;
            int arg = -1;
            for (int p = 0; p < n_maps; ++p) {
                const double c = dp[p] + sw[p][m];
                if (c < best) {
                    best = c;
                    arg = p;
                }
            }
            next[m] = best + step_cost(maps[m], est_assigned[m], est, truth, t, cfg).total();
            parent[t - 1][m] = arg;
        }
        dp.swap(next);
    }

    int final_map = 0;
    for (int m = 1; m < n_maps; ++m)
        if (dp[m] < dp[final_map]) final_map = m;

    // backtrack the optimal map sequence and accumulate the decomposition
    std::vector<int> path(k);
    path[k - 1] = final_map;
    for (int t = k - 1; t >= 1; --t) path[t - 1] = parent[t][path[t]];

    GospaTrace trace;
    trace.maps.reserve(k);
    for (int t = 1; t <= k; ++t) {
        const int m = path[t - 1];
        trace.maps.push_back(maps[m]);
        const StepCost sc = step_cost(maps[m], est_assigned[m], est, truth, t, cfg);
        trace.costs.localization += sc.loc;
        trace.costs.missed += sc.missed;
        trace.costs.false_cost += sc.falsec;
        if (t > 1) trace.costs.switch_total += sw[path[t - 2]][m];
    }
    trace.costs.total = trace.costs.localization + trace.costs.missed + trace.costs.false_cost +
                        trace.costs.switch_total;
    return trace;
}

GospaResult trajectory_gospa(const std::vector<TrajectoryState>& est,
                             const std::vector<TrajectoryState>& truth, int k,
                             const TrajMetricConfig& cfg) {
    return trajectory_gospa_trace(est, truth, k, cfg).costs;
}

double rms_trajectory_error(const std::vector<TrajectoryState>& est,
                            const std::vector<TrajectoryState>& truth, int k,
                            const TrajMetricConfig& cfg) {
    return std::sqrt(trajectory_gospa(est, truth, k, cfg).total / k);
}

}  // namespace disac
