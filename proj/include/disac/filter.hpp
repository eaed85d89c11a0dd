#pragma once

#include <optional>
#include <vector>

#include "disac/geometry.hpp"
#include "disac/motion.hpp"
#include "disac/trajectory.hpp"

namespace disac {

struct FilterConfig {
    std::vector<PppComponent> birth;     // injected every prediction step
    double gate_threshold = 16.266;      // chi-square, 3 dof, 0.999 quantile
    int max_hyps = 200;
    double ppp_thresh = 1e-5;
    double bern_thresh = 1e-5;
    int window_len = 5;                  // L-scan window
    double existence_extract_thresh = 0.5;
};

/// Single broad birth component covering the FoV ball of a BS: position mean
/// at the BS, per-axis position std fov/sqrt(3), velocity std (15, 15, 0.1).
PppComponent make_birth_component(const BsConfig& bs, double weight = 0.05);

/// Result of conditioning a trajectory Gaussian on one measurement.
struct DetectionUpdate {
    TrajectoryGaussian posterior;
    double log_lik = 0.0;  // log N(z; zhat, S)
    double maha = 0.0;     // squared Mahalanobis innovation distance
};

/// Extended Kalman update of the newest window state through the TOA/AOA
/// Jacobian, with the azimuth innovation wrapped. When
/// linearize_at_measurement is set the linearization point is the Cartesian
/// inverse projection of z (used for broad PPP components whose mean may sit
/// on the BS itself). Returns nullopt on degenerate geometry.
std::optional<DetectionUpdate> ekf_detection_update(const TrajectoryGaussian& g,
                                                    const Measurement& z, const BsConfig& bs,
                                                    bool linearize_at_measurement = false);

/// One-step TPMBM prediction to new_step: CV propagation of every Bernoulli
/// and PPP component, survival applied to the alive probability, birth
/// appended to the PPP.
void predict(TpmbmDensity& d, const MotionConfig& motion, const FilterConfig& cfg, int new_step);

/// TPMBM measurement update with per-hypothesis ranked assignment.
void update(TpmbmDensity& d, const MeasurementSet& z, const BsConfig& bs,
            const FilterConfig& cfg);

/// Ellipsoidal gate on the wrapped Mahalanobis innovation distance.
bool gate(const TrajectoryBernoulli& b, const Measurement& z, const BsConfig& bs,
          const FilterConfig& cfg);

/// Trajectories of the highest-weight hypothesis with existence above the
/// extraction threshold.
std::vector<TrajectoryState> extract_estimates(const TpmbmDensity& d, const FilterConfig& cfg);

}  // namespace disac
