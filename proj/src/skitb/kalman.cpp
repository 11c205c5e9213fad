#include "skitb/kalman.hpp"

#include <cmath>

#include <Eigen/LU>

#include "skitb/error.hpp"

namespace skitb::sort {

namespace {

Eigen::Matrix<double, 4, 7> measurement_matrix() {
    Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
    h.leftCols<4>().setIdentity();
    return h;
}

}  // namespace

MeasVec box_to_measurement(const geom::BBox& b) {
    if (!(b.w > 0.0 && b.h > 0.0) || !b.valid()) {
        fail(ErrorCode::InvalidArgument, "kalman: measurement box must have positive area");
    }
    const auto c = geom::center(b);
    MeasVec z;
    z << c.x, c.y, b.w * b.h, b.w / b.h;
    return z;
}

geom::BBox state_to_box(const StateVec& x) {
    const double s = x(2);
    const double r = x(3);
    if (!(s > 0.0 && r > 0.0)) return geom::from_center({x(0), x(1)}, 0.0, 0.0);
    const double w = std::sqrt(s * r);
    return geom::from_center({x(0), x(1)}, w, s / w);
}

KalmanTrack make_track(const geom::BBox& box, int id, const KalmanNoise& noise) {
    KalmanTrack t;
    t.id = id;
    t.mean.head<4>() = box_to_measurement(box);
    t.cov = StateCov::Zero();
    t.cov.diagonal() << noise.initial_observed, noise.initial_observed, noise.initial_observed, noise.initial_observed,
        noise.initial_velocity, noise.initial_velocity, noise.initial_velocity;
    return t;
}

KalmanTrack kalman_predict(KalmanTrack track, double dt, const KalmanNoise& noise) {
    if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "kalman_predict: dt must be > 0");
    // Area cannot shrink through zero.
    if (track.mean(2) + dt * track.mean(6) <= 0.0) track.mean(6) = 0.0;

    StateCov f = StateCov::Identity();
    f(0, 4) = dt;
    f(1, 5) = dt;
    f(2, 6) = dt;
    StateCov q = StateCov::Zero();
    q.diagonal() << noise.process_observed, noise.process_observed, noise.process_observed, noise.process_observed,
        noise.process_velocity, noise.process_velocity, noise.process_area_velocity;

    track.mean = f * track.mean;
    track.cov = f * track.cov * f.transpose() + dt * q;
    track.cov = 0.5 * (track.cov + track.cov.transpose());

    track.age += 1;
    if (track.time_since_update > 0) track.hit_streak = 0;
    track.time_since_update += 1;
    return track;
}

KalmanTrack kalman_update(KalmanTrack track, const geom::BBox& measurement, const KalmanNoise& noise) {
    const MeasVec z = box_to_measurement(measurement);
    const auto h = measurement_matrix();
    Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
    r.diagonal() << noise.measurement_position, noise.measurement_position, noise.measurement_shape,
        noise.measurement_shape;

    const Eigen::Matrix4d s = h * track.cov * h.transpose() + r;
    const Eigen::Matrix<double, 7, 4> gain = track.cov * h.transpose() * s.inverse();
    track.mean += gain * (z - h * track.mean);
    const StateCov i_kh = StateCov::Identity() - gain * h;
    track.cov = i_kh * track.cov * i_kh.transpose() + gain * r * gain.transpose();
    track.cov = 0.5 * (track.cov + track.cov.transpose());

    track.hits += 1;
    track.hit_streak += 1;
    track.time_since_update = 0;
    return track;
}

}  // namespace skitb::sort
