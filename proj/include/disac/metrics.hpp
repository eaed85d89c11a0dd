#pragma once

#include <vector>

#include "disac/trajectory.hpp"

namespace disac {

struct TrajMetricConfig {
    double cutoff = 10.0;      // c, meters
    double order = 2.0;        // p
    double switch_cost = 2.0;  // meters
};

struct GospaResult {
    double total = 0.0;
    double localization = 0.0;
    double missed = 0.0;
    double false_cost = 0.0;
    double switch_total = 0.0;
};

/// GospaResult plus the optimal per-step assignment maps (truth index ->
/// estimate index, -1 unassigned), steps 1..k.
struct GospaTrace {
    GospaResult costs;
    std::vector<std::vector<int>> maps;
};

/// Exact dynamic program over per-step assignment maps between estimated and
/// true trajectories truncated to steps <= k. Matched existing pairs cost
/// min(d, c)^p on position distance, each unmatched existing trajectory c^p/2,
/// an assignment change between consecutive steps switch_cost^p (half when one
/// side is unassigned). Throws std::invalid_argument when either cardinality
/// exceeds 6.
GospaTrace trajectory_gospa_trace(const std::vector<TrajectoryState>& est,
                                  const std::vector<TrajectoryState>& truth, int k,
                                  const TrajMetricConfig& cfg);

GospaResult trajectory_gospa(const std::vector<TrajectoryState>& est,
                             const std::vector<TrajectoryState>& truth, int k,
                             const TrajMetricConfig& cfg);

/// sqrt(total / k).
double rms_trajectory_error(const std::vector<TrajectoryState>& est,
                            const std::vector<TrajectoryState>& truth, int k,
                            const TrajMetricConfig& cfg);

}  // namespace disac
