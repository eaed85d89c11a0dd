#include "disac/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace disac {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kMinRange = 1e-9;  // m, below this the geometry is degenerate
}  // namespace

double wrap_angle(double a) {
    double w = std::remainder(a, 2.0 * kPi);
    if (w <= -kPi) w = kPi;  // convention: (-pi, pi]
    return w;
}

void condition_covariance(Eigen::MatrixXd& cov, double jitter) {
    cov = 0.5 * (cov + cov.transpose()).eval();
    // near-singular joint windows are legitimate (strongly correlated states);
    // only repair genuinely indefinite matrices. The LDLT quasi-diagonal
    // overstates negativity by orders of magnitude on these windows, so it is
    // used only as a loose screen; borderline cases get an exact eigen check.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    const double scale = std::max(1.0, cov.diagonal().maxCoeff());
    if (ldlt.vectorD().minCoeff() >= -1e-4 * scale) return;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() >= -1e-9 * scale) return;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double eps = jitter;
    while (llt.info() != Eigen::Success) {
        cov.diagonal().array() += eps;
        eps *= 10.0;
        llt.compute(cov);
        if (eps > 1.0) throw std::runtime_error("covariance cannot be conditioned");
    }
}

void BsConfig::validate() const {
    if (fov_radius <= 0.0) throw std::invalid_argument("fov_radius must be > 0");
    if (detection_prob_inside < 0.0 || detection_prob_inside > 1.0)
        throw std::invalid_argument("detection_prob_inside must be in [0,1]");
    if (clutter_rate < 0.0) throw std::invalid_argument("clutter_rate must be >= 0");
    Mat3 rr = orientation * orientation.transpose();
    if ((rr - Mat3::Identity()).norm() > 1e-9 || std::abs(orientation.determinant() - 1.0) > 1e-9)
        throw std::invalid_argument("orientation must be a proper rotation");
    Mat3 sym = 0.5 * (measurement_noise_cov + measurement_noise_cov.transpose());
    if ((sym - measurement_noise_cov).norm() > 1e-12)
        throw std::invalid_argument("measurement_noise_cov must be symmetric");
    Eigen::LLT<Mat3> llt(measurement_noise_cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("measurement_noise_cov must be positive definite");
}

double BsConfig::clutter_box_volume() const {
    return (2.0 * fov_radius / kSpeedOfLight) * (2.0 * kPi) * kPi;
}

Measurement measurement_fn(const BsConfig& bs, const Vec3& pos) {
    const Vec3 d_world = pos - bs.position;
    const double range = d_world.norm();
    if (range < kMinRange) throw std::domain_error("target coincides with BS position");
    const Vec3 d = bs.orientation.transpose() * d_world;
    Measurement z;
    z.toa = 2.0 * range / kSpeedOfLight;
    z.azimuth = std::atan2(d.y(), d.x());
    z.elevation = std::atan2(d.z(), std::hypot(d.x(), d.y()));
    return z;
}

Vec3 inverse_measurement(const BsConfig& bs, const Measurement& z) {
    const double range = z.toa * kSpeedOfLight / 2.0;
    const double ce = std::cos(z.elevation);
    const Vec3 dir(ce * std::cos(z.azimuth), ce * std::sin(z.azimuth), std::sin(z.elevation));
    return bs.position + bs.orientation * (range * dir);
}

Eigen::Matrix<double, 3, 6> measurement_jacobian(const BsConfig& bs, const Vec3& pos) {
    const Vec3 d_world = pos - bs.position;
    const double range = d_world.norm();
    if (range < kMinRange) throw std::domain_error("target coincides with BS position");
    const Vec3 d = bs.orientation.transpose() * d_world;
    const double rho2 = d.x() * d.x() + d.y() * d.y();
    const double rho = std::sqrt(rho2);
    const double r2 = range * range;

    Eigen::Matrix3d dlocal;  // d[toa, az, el]/d(d_local)
    dlocal.row(0) = (2.0 / (kSpeedOfLight * range)) * d.transpose();
    if (rho2 < kMinRange * kMinRange) {
        // straight above/below the array: azimuth undefined
        throw std::domain_error("degenerate geometry: target on the local z-axis");
    }
    dlocal.row(1) << -d.y() / rho2, d.x() / rho2, 0.0;
    dlocal.row(2) << -d.x() * d.z() / (rho * r2), -d.y() * d.z() / (rho * r2), rho / r2;

    Eigen::Matrix<double, 3, 6> jac = Eigen::Matrix<double, 3, 6>::Zero();
    jac.leftCols<3>() = dlocal * bs.orientation.transpose();
    return jac;
}

double detection_probability(const BsConfig& bs, const Vec3& pos) {
    return (pos - bs.position).norm() <= bs.fov_radius ? bs.detection_prob_inside : 0.0;
}

double log_likelihood(const Measurement& z, const BsConfig& bs, const Vec3& pos) {
    const Measurement pred = measurement_fn(bs, pos);
    Vec3 resid = z.vec() - pred.vec();
    resid(1) = wrap_angle(resid(1));
    const Mat3& r_cov = bs.measurement_noise_cov;
    Eigen::LLT<Mat3> llt(r_cov);
    const double log_det = 2.0 * Mat3(llt.matrixL()).diagonal().array().log().sum();
    const double maha = resid.dot(llt.solve(resid));
    return -0.5 * (3.0 * std::log(2.0 * kPi) + log_det + maha);
}

MeasurementSet sample_detections_and_clutter(const BsConfig& bs,
                                             const std::vector<Vec3>& true_positions,
                                             RngStream& rng, int time_step) {
    MeasurementSet out;
    out.time_step = time_step;

    Eigen::LLT<Mat3> llt(bs.measurement_noise_cov);
    const Mat3 noise_chol = llt.matrixL();

    for (const Vec3& pos : true_positions) {
        const double pd = detection_probability(bs, pos);
        if (pd <= 0.0) continue;
        if (!rng.bernoulli(pd)) continue;
        const Measurement clean = measurement_fn(bs, pos);
        Vec3 n(rng.gaussian(), rng.gaussian(), rng.gaussian());
        Vec3 zv = clean.vec() + noise_chol * n;
        Measurement z;
        z.toa = std::max(0.0, zv(0));
        z.azimuth = wrap_angle(zv(1));
        z.elevation = std::clamp(zv(2), -kPi / 2.0, kPi / 2.0);
        out.items.push_back(z);
    }

    const int n_clutter = rng.poisson(bs.clutter_rate);
    for (int i = 0; i < n_clutter; ++i) {
        Measurement z;
        z.toa = rng.uniform(0.0, 2.0 * bs.fov_radius / kSpeedOfLight);
        z.azimuth = rng.uniform(-kPi, kPi);
        z.elevation = rng.uniform(-kPi / 2.0, kPi / 2.0);
        out.items.push_back(z);
    }

    // Fisher-Yates shuffle
    for (size_t i = out.items.size(); i > 1; --i) {
        const size_t j = rng.below(i);
        std::swap(out.items[i - 1], out.items[j]);
    }
    return out;
}

}  // namespace disac
