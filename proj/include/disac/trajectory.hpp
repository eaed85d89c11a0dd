#pragma once

#include <cstdint>
#include <vector>

#include "disac/motion.hpp"
#include "disac/types.hpp"

namespace disac {

/// A realized trajectory: state sequence tagged with its birth and end steps.
struct TrajectoryState {
    int birth_step = 1;
    int end_step = 1;
    std::vector<TargetState> states;  // length end_step - birth_step + 1

    int length() const { return end_step - birth_step + 1; }
    bool exists_at(int step) const { return step >= birth_step && step <= end_step; }
    const TargetState& at_step(int step) const { return states[step - birth_step]; }
};

/// Gaussian trajectory density with an L-scan window: the most recent window
/// states are jointly Gaussian, older states are frozen point estimates.
/// alive_prob is the probability that the trajectory is still ongoing
/// (end_step equals the current filter step).
struct TrajectoryGaussian {
    int birth_step = 1;
    int end_step = 1;
    int window_len = 5;                    // L
    Eigen::VectorXd mean;                  // 6 * window states
    Eigen::MatrixXd cov;
    std::vector<Vec6> frozen_history;      // states older than the window
    double alive_prob = 1.0;

    int window_states() const { return static_cast<int>(mean.size()) / 6; }
    int total_states() const { return static_cast<int>(frozen_history.size()) + window_states(); }

    /// Mean / covariance of the newest in-window state.
    Vec6 newest_mean() const { return mean.tail<6>(); }
    Mat6 newest_cov() const { return cov.bottomRightCorner<6, 6>(); }

    /// Single-state density at (mean0, cov0) born at step.
    static TrajectoryGaussian single(int step, const Vec6& mean0, const Mat6& cov0, int window_len);
};

struct TrajectoryBernoulli {
    double existence = 0.0;  // r
    TrajectoryGaussian density;
    uint64_t track_uid = 0;
};

struct PppComponent {
    double weight = 0.0;
    TrajectoryGaussian density;
};

/// One global data-association hypothesis: weight plus references into the
/// shared Bernoulli pool (track-oriented storage).
struct GlobalHypothesis {
    double weight = 0.0;
    std::vector<int> bernoulli_refs;  // sorted indices into TpmbmDensity::pool
};

struct TpmbmDensity {
    std::vector<PppComponent> ppp;
    std::vector<TrajectoryBernoulli> pool;
    std::vector<GlobalHypothesis> hypotheses;
    uint64_t next_uid = 1;

    /// An empty density still carries the one empty hypothesis of weight 1.
    static TpmbmDensity empty() {
        TpmbmDensity d;
        d.hypotheses.push_back(GlobalHypothesis{1.0, {}});
        return d;
    }

    uint64_t fresh_uid() { return next_uid++; }
};

/// Rescale hypothesis weights to sum to 1. Throws std::runtime_error when all
/// weights are zero.
void normalize_hypotheses(TpmbmDensity& d);

/// Remove PPP components below ppp_thresh, Bernoullis with existence below
/// bern_thresh, hypotheses beyond the max_hyps largest weights (and those of
/// negligible weight), then renormalize and garbage-collect the pool.
void prune(TpmbmDensity& d, double ppp_thresh, double bern_thresh, int max_hyps);

/// Append a predicted state block (mean_new = F * newest) to the window and
/// marginalize the oldest state out once the window exceeds window_len, moving
/// its marginal mean to frozen_history.
void window_append_predict(TrajectoryGaussian& g, const Mat6& f, const Mat6& q);

/// Marginalize the oldest in-window state out (no-op while the window is not
/// longer than window_len).
void lscan_slide(TrajectoryGaussian& g);

/// Frozen history concatenated with the window means, tagged with (mu, nu).
TrajectoryState map_trajectory_estimate(const TrajectoryBernoulli& b);

}  // namespace disac
