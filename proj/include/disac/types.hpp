#pragma once

#include <Eigen/Dense>

namespace disac {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Symmetrize and, if needed, add diagonal jitter until Cholesky succeeds.
void condition_covariance(Eigen::MatrixXd& cov, double jitter = 1e-12);

}  // namespace disac
