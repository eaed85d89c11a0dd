#include "disac/motion.hpp"

#include <stdexcept>

namespace disac {

void MotionConfig::validate() const {
    if (dt <= 0.0) throw std::invalid_argument("dt must be > 0");
    if ((accel_std.array() < 0.0).any()) throw std::invalid_argument("accel_std must be >= 0");
    if (survival_prob < 0.0 || survival_prob > 1.0)
        throw std::invalid_argument("survival_prob must be in [0,1]");
}

TargetState cv_predict_mean(const TargetState& x, const MotionConfig& cfg) {
    TargetState out = x;
    out.x.head<3>() += cfg.dt * x.x.tail<3>();
    return out;
}

Mat6 cv_transition_matrix(const MotionConfig& cfg) {
    Mat6 f = Mat6::Identity();
    f.topRightCorner<3, 3>() = cfg.dt * Mat3::Identity();
    return f;
}

Mat6 process_noise_cov(const MotionConfig& cfg) {
    Mat6 q = Mat6::Zero();
    const double dt = cfg.dt;
    for (int i = 0; i < 3; ++i) {
        const double s2 = cfg.accel_std(i) * cfg.accel_std(i);
        q(i, i) = s2 * dt * dt * dt * dt / 4.0;
        q(i, i + 3) = q(i + 3, i) = s2 * dt * dt * dt / 2.0;
        q(i + 3, i + 3) = s2 * dt * dt;
    }
    return q;
}

double survival_probability(const TargetState&, const MotionConfig& cfg) {
    return cfg.survival_prob;
}

}  // namespace disac
