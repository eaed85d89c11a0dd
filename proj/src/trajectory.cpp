#include "disac/trajectory.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace disac {

TrajectoryGaussian TrajectoryGaussian::single(int step, const Vec6& mean0, const Mat6& cov0,
                                              int window_len) {
    TrajectoryGaussian g;
    g.birth_step = step;
    g.end_step = step;
    g.window_len = window_len;
    g.mean = mean0;
    g.cov = cov0;
    g.alive_prob = 1.0;
    return g;
}

void normalize_hypotheses(TpmbmDensity& d) {
    double sum = 0.0;
    for (const auto& h : d.hypotheses) sum += h.weight;
    if (!(sum > 0.0)) throw std::runtime_error("degenerate density: all hypothesis weights zero");
    for (auto& h : d.hypotheses) h.weight /= sum;
}

void prune(TpmbmDensity& d, double ppp_thresh, double bern_thresh, int max_hyps) {
    std::erase_if(d.ppp, [&](const PppComponent& c) { return c.weight < ppp_thresh; });

    for (auto& h : d.hypotheses) {
        std::erase_if(h.bernoulli_refs,
                      [&](int i) { return d.pool[i].existence < bern_thresh; });
        std::sort(h.bernoulli_refs.begin(), h.bernoulli_refs.end());
    }

    // removing Bernoullis may leave identical hypotheses; merge them
    std::map<std::vector<int>, double> merged;
    for (const auto& h : d.hypotheses) merged[h.bernoulli_refs] += h.weight;
    d.hypotheses.clear();
    for (auto& [refs, w] : merged) d.hypotheses.push_back(GlobalHypothesis{w, refs});

    std::sort(d.hypotheses.begin(), d.hypotheses.end(),
              [](const GlobalHypothesis& a, const GlobalHypothesis& b) {
                  if (a.weight != b.weight) return a.weight > b.weight;
                  return a.bernoulli_refs < b.bernoulli_refs;
              });
    if (static_cast<int>(d.hypotheses.size()) > max_hyps) d.hypotheses.resize(max_hyps);

    normalize_hypotheses(d);
    std::erase_if(d.hypotheses, [](const GlobalHypothesis& h) { return h.weight < 1e-12; });
    normalize_hypotheses(d);

    // pool garbage collection
    std::vector<int> remap(d.pool.size(), -1);
    std::vector<TrajectoryBernoulli> kept;
    for (auto& h : d.hypotheses) {
        for (int& r : h.bernoulli_refs) {
            if (remap[r] < 0) {
                remap[r] = static_cast<int>(kept.size());
                kept.push_back(std::move(d.pool[r]));
            }
            r = remap[r];
        }
    }
    d.pool = std::move(kept);
}

void lscan_slide(TrajectoryGaussian& g) {
    const int w = g.window_states();
    if (w <= g.window_len) return;
    g.frozen_history.push_back(g.mean.head<6>());
    const int n = static_cast<int>(g.mean.size()) - 6;
    g.mean = g.mean.tail(n).eval();
    g.cov = g.cov.bottomRightCorner(n, n).eval();
}

void window_append_predict(TrajectoryGaussian& g, const Mat6& f, const Mat6& q) {
    const int n = static_cast<int>(g.mean.size());
    Eigen::VectorXd mean(n + 6);
    mean.head(n) = g.mean;
    mean.tail<6>() = f * g.mean.tail<6>();

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n + 6, n + 6);
    cov.topLeftCorner(n, n) = g.cov;
    const Eigen::MatrixXd cross = g.cov.rightCols<6>() * f.transpose();  // n x 6
    cov.topRightCorner(n, 6) = cross;
    cov.bottomLeftCorner(6, n) = cross.transpose();
    cov.bottomRightCorner<6, 6>() = f * g.cov.bottomRightCorner<6, 6>() * f.transpose() + q;

    g.mean = std::move(mean);
    g.cov = std::move(cov);
    g.end_step += 1;
    lscan_slide(g);
}

TrajectoryState map_trajectory_estimate(const TrajectoryBernoulli& b) {
    const TrajectoryGaussian& g = b.density;
    TrajectoryState t;
    t.birth_step = g.birth_step;
    t.end_step = g.end_step;
    t.states.reserve(g.total_states());
    for (const Vec6& x : g.frozen_history) t.states.emplace_back(x);
    for (int i = 0; i < g.window_states(); ++i)
        t.states.emplace_back(Vec6(g.mean.segment<6>(6 * i)));
    return t;
}

}  // namespace disac
