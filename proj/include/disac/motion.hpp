#pragma once

#include "disac/types.hpp"

namespace disac {

/// Position/velocity state x = [s, s_dot].
struct TargetState {
    Vec6 x = Vec6::Zero();

    TargetState() = default;
    explicit TargetState(const Vec6& v) : x(v) {}
    TargetState(const Vec3& pos, const Vec3& vel) {
        x.head<3>() = pos;
        x.tail<3>() = vel;
    }

    Vec3 position() const { return x.head<3>(); }
    Vec3 velocity() const { return x.tail<3>(); }
};

/// Nearly-constant-velocity model parameters.
struct MotionConfig {
    double dt = 0.1;                       // s
    Vec3 accel_std = Vec3(0.05, 0.05, 0.0);  // m/s^2 per axis
    double survival_prob = 0.99;

    void validate() const;
};

/// Mean transition v(x): position advanced by dt * velocity.
TargetState cv_predict_mean(const TargetState& x, const MotionConfig& cfg);

/// CV transition matrix F (6x6, position/velocity ordering).
Mat6 cv_transition_matrix(const MotionConfig& cfg);

/// Discretized white-noise-acceleration covariance Q.
Mat6 process_noise_cov(const MotionConfig& cfg);

/// Constant survival probability p_S (state-independent).
double survival_probability(const TargetState& x, const MotionConfig& cfg);

}  // namespace disac
