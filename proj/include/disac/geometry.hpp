#pragma once

#include <vector>

#include "disac/rng.hpp"
#include "disac/types.hpp"

namespace disac {

/// Static configuration of one monostatic sensing base station.
struct BsConfig {
    int id = 0;
    Vec3 position = Vec3::Zero();           // m
    Mat3 orientation = Mat3::Identity();    // local->world rotation
    double fov_radius = 70.0;               // m, closed ball around position
    double detection_prob_inside = 0.9;
    double clutter_rate = 3.0;              // expected clutter count per scan
    Mat3 measurement_noise_cov = Mat3::Identity();  // (s^2, rad^2, rad^2)

    void validate() const;  // throws std::invalid_argument on violation

    /// Volume of the clutter measurement-space box
    /// [0, 2*fov/c] x (-pi, pi] x [-pi/2, pi/2].
    double clutter_box_volume() const;

    /// Clutter intensity value c(z), uniform over the box.
    double clutter_intensity() const { return clutter_rate / clutter_box_volume(); }
};

/// One resolved TOA/AOA measurement.
struct Measurement {
    double toa = 0.0;       // s
    double azimuth = 0.0;   // rad, (-pi, pi]
    double elevation = 0.0; // rad, [-pi/2, pi/2]

    Vec3 vec() const { return Vec3(toa, azimuth, elevation); }
};

struct MeasurementSet {
    int time_step = 0;
    std::vector<Measurement> items;
};

/// h(s): round-trip TOA plus azimuth/elevation of pos in the BS local frame.
/// Throws std::domain_error when pos coincides with the BS position.
Measurement measurement_fn(const BsConfig& bs, const Vec3& pos);

/// Cartesian position from a noiseless measurement (inverse of measurement_fn).
Vec3 inverse_measurement(const BsConfig& bs, const Measurement& z);

/// d[toa, az, el]/d[pos, vel] at pos; the velocity block is zero.
Eigen::Matrix<double, 3, 6> measurement_jacobian(const BsConfig& bs, const Vec3& pos);

/// p_D: detection_prob_inside on the closed FoV ball, 0 outside.
double detection_probability(const BsConfig& bs, const Vec3& pos);

/// log N(z; h(pos), R) with the azimuth residual wrapped to (-pi, pi].
double log_likelihood(const Measurement& z, const BsConfig& bs, const Vec3& pos);

/// Draws p_D-thinned noisy detections of the true positions plus
/// Poisson(clutter_rate) clutter uniform over the measurement-space box,
/// shuffled so ordering carries no information.
MeasurementSet sample_detections_and_clutter(const BsConfig& bs,
                                             const std::vector<Vec3>& true_positions,
                                             RngStream& rng, int time_step = 0);

}  // namespace disac
