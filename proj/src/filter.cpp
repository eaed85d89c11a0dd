#include "disac/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "disac/assignment.hpp"

namespace disac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogFloor = -700.0;

double safe_log(double x) { return x > 0.0 ? std::max(std::log(x), kLogFloor) : kLogFloor; }

}  // namespace

PppComponent make_birth_component(const BsConfig& bs, double weight) {
    PppComponent c;
    c.weight = weight;
    Vec6 mean;
    mean.head<3>() = bs.position;
    mean.tail<3>().setZero();
    Mat6 cov = Mat6::Zero();
    const double pos_var = (bs.fov_radius / std::sqrt(3.0)) * (bs.fov_radius / std::sqrt(3.0));
    cov(0, 0) = cov(1, 1) = cov(2, 2) = pos_var;
    cov(3, 3) = cov(4, 4) = 15.0 * 15.0;
    cov(5, 5) = 0.1 * 0.1;
    c.density = TrajectoryGaussian::single(0, mean, cov, 5);
    return c;
}

std::optional<DetectionUpdate> ekf_detection_update(const TrajectoryGaussian& g,
                                                    const Measurement& z, const BsConfig& bs,
                                                    bool linearize_at_measurement) {
    const Vec6 newest = g.newest_mean();
    Vec3 lin_pos;
    if (linearize_at_measurement) {
        lin_pos = inverse_measurement(bs, z);
    } else {
        lin_pos = newest.head<3>();
    }
    if ((lin_pos - bs.position).norm() < 0.5) return std::nullopt;

    Eigen::Matrix<double, 3, 6> h;
    Measurement pred0;
    try {
        h = measurement_jacobian(bs, lin_pos);
        pred0 = measurement_fn(bs, lin_pos);
    } catch (const std::domain_error&) {
        return std::nullopt;
    }

    // first-order predicted measurement around the linearization point
    Vec3 zhat = pred0.vec() + h.leftCols<3>() * (newest.head<3>() - lin_pos);
    Vec3 innov = z.vec() - zhat;
    innov(1) = wrap_angle(innov(1));

    const Mat6 p_nn = g.newest_cov();
    Mat3 s = h * p_nn * h.transpose() + bs.measurement_noise_cov;
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::LLT<Mat3> llt(s);
    if (llt.info() != Eigen::Success) return std::nullopt;

    const double log_det = 2.0 * Mat3(llt.matrixL()).diagonal().array().log().sum();
    const Vec3 s_inv_innov = llt.solve(innov);
    const double maha = innov.dot(s_inv_innov);

    DetectionUpdate out;
    out.maha = maha;
    out.log_lik = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det + maha);

    // blockwise update: fixed-size arithmetic on the newest state, dynamic on
    // the window cross-covariances
    const int n = static_cast<int>(g.mean.size());
    const int top = n - 6;
    const Mat3 s_inv = llt.solve(Mat3::Identity());
    const Eigen::Matrix<double, 6, 3> pht_nn = p_nn * h.transpose();
    const Eigen::Matrix<double, 6, 3> gain_nn = pht_nn * s_inv;
    const Eigen::MatrixXd pht_top = g.cov.topRightCorner(top, 6) * h.transpose();  // top x 3
    const Eigen::MatrixXd gain_top = pht_top * s_inv;

    out.posterior = g;
    out.posterior.mean.head(top) += gain_top * innov;
    out.posterior.mean.tail<6>() += gain_nn * innov;
    Eigen::MatrixXd cov = g.cov;
    cov.topLeftCorner(top, top) -= gain_top * pht_top.transpose();
    cov.topRightCorner(top, 6) -= gain_top * pht_nn.transpose();
    cov.bottomLeftCorner(6, top) = cov.topRightCorner(top, 6).transpose();
    cov.bottomRightCorner<6, 6>() = p_nn - gain_nn * pht_nn.transpose();
    condition_covariance(cov);
    out.posterior.cov = std::move(cov);
    out.posterior.alive_prob = 1.0;  // detection implies the trajectory is ongoing
    return out;
}

void predict(TpmbmDensity& d, const MotionConfig& motion, const FilterConfig& cfg, int new_step) {
    const Mat6 f = cv_transition_matrix(motion);
    const Mat6 q = process_noise_cov(motion);
    for (auto& b : d.pool) {
        window_append_predict(b.density, f, q);
        b.density.alive_prob *= motion.survival_prob;
    }
    for (auto& c : d.ppp) {
        window_append_predict(c.density, f, q);
        c.density.alive_prob *= motion.survival_prob;
    }
    for (const PppComponent& tmpl : cfg.birth) {
        PppComponent c = tmpl;
        c.density.birth_step = new_step;
        c.density.end_step = new_step;
        c.density.window_len = cfg.window_len;
        c.density.alive_prob = 1.0;
        d.ppp.push_back(std::move(c));
    }
}

bool gate(const TrajectoryBernoulli& b, const Measurement& z, const BsConfig& bs,
          const FilterConfig& cfg) {
    const auto upd = ekf_detection_update(b.density, z, bs);
    return upd.has_value() && upd->maha <= cfg.gate_threshold;
}

void update(TpmbmDensity& d, const MeasurementSet& zset, const BsConfig& bs,
            const FilterConfig& cfg) {
    const int n_z = static_cast<int>(zset.items.size());
    const int n_prior = static_cast<int>(d.pool.size());

    normalize_hypotheses(d);

    std::vector<TrajectoryBernoulli> children;
    // per prior Bernoulli: misdetection child, detection children, and the
    // log factors entering the assignment costs
    std::vector<int> mis_child(n_prior, -1);
    std::vector<double> log_mis(n_prior, 0.0);
    std::vector<std::vector<int>> det_child(n_prior, std::vector<int>(n_z, -1));
    std::vector<std::vector<double>> log_det(n_prior, std::vector<double>(n_z, kLogFloor));

    for (int i = 0; i < n_prior; ++i) {
        const TrajectoryBernoulli& prior = d.pool[i];
        const double pd = detection_probability(bs, prior.density.newest_mean().head<3>());
        const double a = prior.density.alive_prob;
        const double r = prior.existence;
        const double q_det = a * pd;  // detection probability given existence
        const double l_mis = 1.0 - r * q_det;
        log_mis[i] = safe_log(l_mis);

        TrajectoryBernoulli mis = prior;
        if (l_mis > 0.0) {
            mis.existence = r * (1.0 - q_det) / l_mis;
            mis.density.alive_prob = (q_det < 1.0) ? a * (1.0 - pd) / (1.0 - q_det) : 0.0;
        } else {
            mis.existence = 0.0;
            mis.density.alive_prob = 0.0;
        }
        mis_child[i] = static_cast<int>(children.size());
        children.push_back(std::move(mis));

        if (q_det <= 0.0) continue;
        for (int q = 0; q < n_z; ++q) {
            auto upd = ekf_detection_update(prior.density, zset.items[q], bs);
            if (!upd || upd->maha > cfg.gate_threshold) continue;
            TrajectoryBernoulli det;
            det.existence = 1.0;
            det.density = std::move(upd->posterior);
            det.track_uid = prior.track_uid;
            log_det[i][q] = safe_log(r * q_det) + upd->log_lik;
            det_child[i][q] = static_cast<int>(children.size());
            children.push_back(std::move(det));
        }
    }

    // first-detection-of-PPP children, one per measurement
    const double clutter_val = bs.clutter_rate > 0.0 ? bs.clutter_intensity() : 0.0;
    std::vector<int> new_child(n_z, -1);
    std::vector<double> log_new(n_z, kLogFloor);
    std::vector<double> pd_ppp(d.ppp.size(), 0.0);
    for (size_t p = 0; p < d.ppp.size(); ++p)
        pd_ppp[p] = detection_probability(bs, d.ppp[p].density.newest_mean().head<3>());

    for (int q = 0; q < n_z; ++q) {
        double evidence = 0.0;
        double best_term = -1.0;
        std::optional<DetectionUpdate> best_upd;
        for (size_t p = 0; p < d.ppp.size(); ++p) {
            const auto& comp = d.ppp[p];
            const double detectable = comp.weight * comp.density.alive_prob * pd_ppp[p];
            if (detectable <= 0.0) continue;
            auto upd = ekf_detection_update(comp.density, zset.items[q], bs, true);
            if (!upd || upd->maha > cfg.gate_threshold) continue;
            const double term = detectable * std::exp(upd->log_lik);
            evidence += term;
            if (term > best_term) {
                best_term = term;
                best_upd = std::move(upd);
            }
        }
        const double l_new = evidence + clutter_val;
        log_new[q] = safe_log(l_new);
        TrajectoryBernoulli nb;
        nb.existence = l_new > 0.0 ? evidence / l_new : 0.0;
        if (best_upd) {
            nb.density = std::move(best_upd->posterior);
        } else {
            // no PPP support: clutter-only interpretation, kept with r = 0
            Vec6 mean;
            mean.head<3>() = inverse_measurement(bs, zset.items[q]);
            mean.tail<3>().setZero();
            Mat6 cov = Mat6::Identity() * 100.0;
            nb.density = TrajectoryGaussian::single(zset.time_step, mean, cov, cfg.window_len);
            nb.existence = 0.0;
        }
        nb.track_uid = d.fresh_uid();
        new_child[q] = static_cast<int>(children.size());
        children.push_back(std::move(nb));
    }

    // per prior hypothesis: ranked assignment over (tracks | new-target) columns
    struct Candidate {
        std::vector<int> refs;
        double log_w;
    };
    std::vector<Candidate> candidates;

    for (const auto& hyp : d.hypotheses) {
        const auto& tracks = hyp.bernoulli_refs;
        const int n_t = static_cast<int>(tracks.size());
        double base = safe_log(hyp.weight);
        for (int t : tracks) base += log_mis[t];

        const int k_j = std::max(1, static_cast<int>(std::ceil(cfg.max_hyps * hyp.weight)));

        std::vector<Assignment> assignments;
        if (n_z == 0) {
            assignments.push_back(Assignment{{}, 0.0});
        } else {
            Eigen::MatrixXd cost(n_z, n_t + n_z);
            cost.setConstant(kInf);
            for (int q = 0; q < n_z; ++q) {
                for (int t = 0; t < n_t; ++t) {
                    const int i = tracks[t];
                    if (det_child[i][q] >= 0) cost(q, t) = -(log_det[i][q] - log_mis[i]);
                }
                cost(q, n_t + q) = -log_new[q];
            }
            assignments = kbest_assignments(cost, k_j);
        }

        for (const Assignment& a : assignments) {
            Candidate cand;
            cand.log_w = base - a.cost;
            cand.refs.reserve(n_t + n_z);
            std::vector<int> track_meas(n_t, -1);
            for (int q = 0; q < n_z; ++q) {
                const int col = a.row_to_col[q];
                if (col < n_t)
                    track_meas[col] = q;
                else
                    cand.refs.push_back(new_child[q]);
            }
            for (int t = 0; t < n_t; ++t) {
                const int i = tracks[t];
                cand.refs.push_back(track_meas[t] >= 0 ? det_child[i][track_meas[t]]
                                                       : mis_child[i]);
            }
            std::sort(cand.refs.begin(), cand.refs.end());
            candidates.push_back(std::move(cand));
        }
    }

    // combine duplicate association histories in linear space
    double max_log = kLogFloor;
    for (const auto& c : candidates) max_log = std::max(max_log, c.log_w);
    std::map<std::vector<int>, double> combined;
    for (auto& c : candidates) combined[c.refs] += std::exp(c.log_w - max_log);

    d.pool = std::move(children);
    d.hypotheses.clear();
    for (auto& [refs, w] : combined)
        d.hypotheses.push_back(GlobalHypothesis{w, refs});

    // thin the undetected intensity by the misdetection probability
    for (size_t p = 0; p < d.ppp.size(); ++p)
        d.ppp[p].weight *= 1.0 - d.ppp[p].density.alive_prob * pd_ppp[p];

    prune(d, cfg.ppp_thresh, cfg.bern_thresh, cfg.max_hyps);
}

std::vector<TrajectoryState> extract_estimates(const TpmbmDensity& d, const FilterConfig& cfg) {
    std::vector<TrajectoryState> out;
    if (d.hypotheses.empty()) return out;
    const auto best = std::max_element(
        d.hypotheses.begin(), d.hypotheses.end(),
        [](const GlobalHypothesis& a, const GlobalHypothesis& b) { return a.weight < b.weight; });
    for (int i : best->bernoulli_refs) {
        if (d.pool[i].existence >= cfg.existence_extract_thresh)
            out.push_back(map_trajectory_estimate(d.pool[i]));
    }
    return out;
}

}  // namespace disac
