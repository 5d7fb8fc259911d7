#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rtrack/rng.hpp"
#include "rtrack/types.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

using Mat42 = Eigen::Matrix<double, 4, 2>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Range-bearing noise whose covariance grows as exp(gamma * d).
struct NoiseParams {
    double sigma_range = 0.05;    // m
    double sigma_bearing = 0.05;  // rad
    double gamma = 0.1;           // 1/m
    double max_range = std::numeric_limits<double>::infinity();
    double d_min = 1e-6;

    Mat2 covariance(double d) const {
        const double s = std::exp(gamma * d);
        Mat2 r = Mat2::Zero();
        r(0, 0) = sigma_range * sigma_range * s;
        r(1, 1) = sigma_bearing * sigma_bearing * s;
        return r;
    }
};

/// Per-target constant-velocity dynamics y' = A y + B v + w. The controller
/// input v is a velocity correction: v = kv * (v_des - vel) with
/// v_des = kp * (waypoint - p) clamped to v_max.
struct TargetModel {
    double dt = 0.1;
    Mat4 A = Mat4::Identity();
    Mat42 B = Mat42::Zero();
    Mat4 Q = Mat4::Zero();
    double v_max = 0.3;
    double kp = 0.5;
    double kv = 1.0;
    double waypoint_tolerance = 0.2;
    // Empty list for a target means constant velocity (v = 0).
    std::vector<std::vector<Vec2>> waypoints;
};

inline Mat4 cv_transition(double dt) {
    Mat4 a = Mat4::Identity();
    a(0, 2) = dt;
    a(1, 3) = dt;
    return a;
}

inline TargetModel make_cv_model(double dt, double q_pos, double q_vel) {
    TargetModel m;
    m.dt = dt;
    m.A = cv_transition(dt);
    m.B.bottomRows<2>() = dt * Mat2::Identity();
    m.Q.diagonal() << q_pos, q_pos, q_vel, q_vel;
    return m;
}

/// Block-diagonal replication of a per-target block over n targets.
inline Mat block_replicate(const Mat& block, int n) {
    Mat out = Mat::Zero(block.rows() * n, block.cols() * n);
    for (int j = 0; j < n; ++j) out.block(block.rows() * j, block.cols() * j, block.rows(), block.cols()) = block;
    return out;
}

inline Vec2 clamp_norm(const Vec2& v, double limit) {
    const double n = v.norm();
    return n > limit ? Vec2(v * (limit / n)) : v;
}

/// Waypoint-seeking control for one target; advances the waypoint index when
/// the target is within tolerance.
inline Vec2 target_control(TargetState& target, const TargetModel& model) {
    if (target.id >= static_cast<int>(model.waypoints.size()) || model.waypoints[target.id].empty())
        return Vec2::Zero();
    const auto& wps = model.waypoints[target.id];
    const int n = static_cast<int>(wps.size());
    target.waypoint_index %= n;
    if (n > 1 && (wps[target.waypoint_index] - target.position()).norm() < model.waypoint_tolerance)
        target.waypoint_index = (target.waypoint_index + 1) % n;
    const Vec2 desired = clamp_norm(model.kp * (wps[target.waypoint_index] - target.position()), model.v_max);
    return model.kv * (desired - target.velocity());
}

/// Advances all targets one step; process noise comes from `rng`.
inline std::vector<TargetState> step_targets(std::vector<TargetState> targets, const TargetModel& model,
                                             RngStream& rng) {
    const bool noisy = model.Q.cwiseAbs().maxCoeff() > 0.0;
    // Symmetric square root; Q may be semi-definite (zero position noise).
    Mat4 root = Mat4::Zero();
    if (noisy) {
        Eigen::SelfAdjointEigenSolver<Mat4> es(model.Q);
        root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    for (auto& t : targets) {
        const Vec2 v = target_control(t, model);
        Vec4 next = model.A * t.state + model.B * v;
        if (noisy) {
            Vec4 n;
            for (int k = 0; k < 4; ++k) n[k] = rng.normal();
            next += root * n;
        }
        next.tail<2>() = clamp_norm(next.tail<2>(), model.v_max);
        t.state = next;
    }
    return targets;
}

struct RobotModel {
    double dt = 0.1;
    double u_max = 2.0;  // m/s
};

inline Vec2 step_robot(const Vec2& x, const Vec2& u, const RobotModel& model) {
    if (u.norm() > model.u_max + 1e-9) throw DomainError("control norm exceeds u_max");
    return x + model.dt * u;
}

struct Measurement {
    int robot = 0;
    int target = 0;
    Vec2 robot_position = Vec2::Zero();
    double range = 0.0;
    double bearing = 0.0;
    Mat2 noise_cov = Mat2::Identity();
};

/// Noise-free range and bearing from a robot position to a target state.
inline Vec2 measurement_function(const Vec2& robot_pos, const Vec4& target) {
    const Vec2 delta = target.head<2>() - robot_pos;
    return {delta.norm(), std::atan2(delta.y(), delta.x())};
}

inline std::optional<Measurement> measure(const RobotState& robot, const TargetState& target, RngStream& rng,
                                          const NoiseParams& noise) {
    if (robot.status.sensing != Capability::Ok) return std::nullopt;
    const Vec2 delta = target.position() - robot.position;
    const double d = delta.norm();
    if (d > noise.max_range) return std::nullopt;
    Measurement m;
    m.robot = robot.id;
    m.target = target.id;
    m.robot_position = robot.position;
    m.noise_cov = noise.covariance(d);
    const double er = std::sqrt(m.noise_cov(0, 0)) * rng.normal();
    const double eb = std::sqrt(m.noise_cov(1, 1)) * rng.normal();
    m.range = std::max(0.0, d + er);
    m.bearing = wrap_angle(std::atan2(delta.y(), delta.x()) + eb);
    return m;
}

/// Jacobian of (range, bearing) w.r.t. one target's [px, py, vx, vy].
inline Mat24 measurement_jacobian(const Vec2& robot_pos, const Vec4& target, double d_min = 1e-6) {
    const Vec2 delta = target.head<2>() - robot_pos;
    const double d2 = delta.squaredNorm();
    const double d = std::sqrt(d2);
    if (d <= d_min) throw DomainError("degenerate geometry: robot on top of target");
    Mat24 h = Mat24::Zero();
    h(0, 0) = delta.x() / d;
    h(0, 1) = delta.y() / d;
    h(1, 0) = -delta.y() / d2;
    h(1, 1) = delta.x() / d2;
    return h;
}

/// Stacked measurement system for one EKF update. `predicted` holds h(y_hat);
/// `angular` flags rows whose innovation must be wrapped.
struct MeasurementStack {
    Vec z;
    Vec predicted;
    Mat H;
    Mat R;
    std::vector<bool> angular;

    Eigen::Index rows() const { return z.size(); }
};

/// Rows ordered by (robot, target). Measurements whose predicted geometry is
/// degenerate (d <= d_min) are dropped.
inline MeasurementStack stack_measurements(std::span<const Measurement> measurements,
                                           const TargetEstimate& predicted, double d_min = 1e-6) {
    std::vector<const Measurement*> order;
    for (const auto& m : measurements) {
        const Vec4 y = predicted.mean.segment<4>(4 * m.target);
        if ((y.head<2>() - m.robot_position).norm() > d_min) order.push_back(&m);
    }
    std::stable_sort(order.begin(), order.end(), [](const Measurement* a, const Measurement* b) {
        return a->robot != b->robot ? a->robot < b->robot : a->target < b->target;
    });
    const auto rows = static_cast<Eigen::Index>(2 * order.size());
    const auto dim = predicted.mean.size();
    MeasurementStack s{Vec::Zero(rows), Vec::Zero(rows), Mat::Zero(rows, dim), Mat::Zero(rows, rows), {}};
    s.angular.assign(static_cast<std::size_t>(rows), false);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& m = *order[k];
        const auto r = static_cast<Eigen::Index>(2 * k);
        const Vec4 y = predicted.mean.segment<4>(4 * m.target);
        s.z.segment<2>(r) << m.range, m.bearing;
        s.predicted.segment<2>(r) = measurement_function(m.robot_position, y);
        s.H.block<2, 4>(r, 4 * m.target) = measurement_jacobian(m.robot_position, y, d_min);
        s.R.block<2, 2>(r, r) = m.noise_cov;
        s.angular[static_cast<std::size_t>(r + 1)] = true;
    }
    return s;
}

}  // namespace rtrack
