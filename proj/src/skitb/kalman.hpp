#pragma once

#include <Eigen/Core>

#include "skitb/geometry.hpp"

namespace skitb::sort {

using StateVec = Eigen::Matrix<double, 7, 1>;
using StateCov = Eigen::Matrix<double, 7, 7>;
using MeasVec = Eigen::Matrix<double, 4, 1>;

/// Noise magnitudes of the constant-velocity box filter. Defaults are the classic SORT values.
struct KalmanNoise {
    double measurement_position = 1.0;   // u, v
    double measurement_shape = 10.0;     // s, r
    double initial_observed = 10.0;      // variance of the observed components at birth
    double initial_velocity = 10000.0;   // variance of the unobserved velocities at birth
    double process_observed = 1.0;       // per-frame process noise on u, v, s, r
    double process_velocity = 0.01;      // per-frame process noise on u', v'
    double process_area_velocity = 1e-4; // per-frame process noise on s'
};

/// Box track with state [u, v, s, r, u', v', s']: centre, area, aspect ratio w/h and velocities.
struct KalmanTrack {
    StateVec mean = StateVec::Zero();
    StateCov cov = StateCov::Identity();
    int id = 0;
    int hits = 0;
    int hit_streak = 0;
    int age = 0;
    int time_since_update = 0;
};

/// Throws InvalidArgument unless the box has positive area.
MeasVec box_to_measurement(const geom::BBox& b);
/// Non-positive area or aspect collapses to a zero-size box at the centre.
geom::BBox state_to_box(const StateVec& x);

KalmanTrack make_track(const geom::BBox& box, int id, const KalmanNoise& noise = {});

/// Constant-velocity prediction over dt frames; covariance inflated by dt times the process noise.
KalmanTrack kalman_predict(KalmanTrack track, double dt = 1.0, const KalmanNoise& noise = {});

/// Linear correction in [u, v, s, r] (Joseph form). Throws InvalidArgument for a non-positive-area
/// measurement.
KalmanTrack kalman_update(KalmanTrack track, const geom::BBox& measurement, const KalmanNoise& noise = {});

inline geom::BBox track_box(const KalmanTrack& t) { return state_to_box(t.mean); }

}  // namespace skitb::sort
