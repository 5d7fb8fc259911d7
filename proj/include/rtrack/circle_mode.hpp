#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "rtrack/motion_sensing.hpp"
#include "rtrack/types.hpp"

namespace rtrack {

struct CircleFit {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
    double rms_residual = 0.0;
};

struct CircleAcceptance {
    double residual_frac = 0.05;
    double min_arc = 1.5 * std::numbers::pi;  // 270 degrees
};

/// Angle (radians) covered by the points around `center`: 2 pi minus the
/// largest angular gap.
inline double subtended_angle(std::span<const Vec2> points, const Vec2& center) {
    std::vector<double> ang;
    ang.reserve(points.size());
    for (const auto& p : points) ang.push_back(std::atan2(p.y() - center.y(), p.x() - center.x()));
    std::sort(ang.begin(), ang.end());
    double gap = ang.front() + 2.0 * std::numbers::pi - ang.back();
    for (std::size_t k = 1; k < ang.size(); ++k) gap = std::max(gap, ang[k] - ang[k - 1]);
    return 2.0 * std::numbers::pi - gap;
}

/// Kasa algebraic fit of x^2 + y^2 + a x + b y + c = 0. Returns nullopt
/// (not circular) for fewer than 6 points, degenerate geometry, a relative
/// rms residual above the threshold or too short an arc.
inline std::optional<CircleFit> estimate_circle(std::span<const Vec2> points, const CircleAcceptance& accept = {}) {
    if (points.size() < 6) return std::nullopt;
    Vec2 mean = Vec2::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());

    const auto n = static_cast<Eigen::Index>(points.size());
    Mat a(n, 3);
    Vec rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2 q = points[static_cast<std::size_t>(i)] - mean;
        a(i, 0) = q.x();
        a(i, 1) = q.y();
        a(i, 2) = 1.0;
        rhs[i] = -q.squaredNorm();
    }
    Eigen::ColPivHouseholderQR<Mat> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < 3) return std::nullopt;
    const Eigen::Vector3d sol = qr.solve(rhs);
    const Vec2 c_local(-0.5 * sol[0], -0.5 * sol[1]);
    const double r2 = c_local.squaredNorm() - sol[2];
    if (!(r2 > 0.0) || !std::isfinite(r2)) return std::nullopt;

    CircleFit fit;
    fit.center = mean + c_local;
    fit.radius = std::sqrt(r2);
    double ss = 0.0;
    for (const auto& p : points) {
        const double e = (p - fit.center).norm() - fit.radius;
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
    if (!(fit.rms_residual < accept.residual_frac * fit.radius)) return std::nullopt;
    if (!(subtended_angle(points, fit.center) > accept.min_arc)) return std::nullopt;
    return fit;
}

/// u = k_r (radius - |p - c|) r_hat + radius * omega * t_hat, counter-clockwise,
/// clamped to u_max.
inline Vec2 circular_mode_control(const Vec2& center, double radius, const Vec2& pos, double angular_rate,
                                  double gain, double u_max) {
    if (!(radius > 0.0)) throw DomainError("circular_mode_control: radius must be positive");
    const Vec2 rel = pos - center;
    const double d = rel.norm();
    const Vec2 rhat = d > 1e-12 ? Vec2(rel / d) : Vec2(1.0, 0.0);
    const Vec2 that(-rhat.y(), rhat.x());
    return clamp_norm(gain * (radius - d) * rhat + radius * angular_rate * that, u_max);
}

struct JamSample {
    Vec2 position = Vec2::Zero();
    bool jammed = false;
};

/// Centroid of the jammed samples.
inline Vec2 estimate_attacker_center(std::span<const JamSample> history) {
    Vec2 sum = Vec2::Zero();
    int count = 0;
    for (const auto& s : history)
        if (s.jammed) {
            sum += s.position;
            ++count;
        }
    if (count == 0) throw DomainError("estimate_attacker_center: no jammed sample");
    return sum / count;
}

struct CircularModeConfig {
    double angular_rate = 2.5;  // rad/s
    double radial_gain = 8.0;   // 1/s
    double radius = 0.0;        // 0: the jam distance at attack time
    double radius_min = 0.3;
    double radius_max = 0.8;
    double probe_spacing = 0.6;     // m between spiral rings
    double probe_max_radius = 3.0;  // m, half-width of the swept square
};

/// Behavior of a robot whose communication is permanently lost. It first
/// sweeps a square spiral around `probe_origin`, logging whether it is
/// within the jam distance of the attacker, until a full ring of four legs
/// that encloses the attack position passes with at most one jammed sample
/// per leg (the attacker's position jitters from tick to tick). The jam
/// region is connected and contains the attack position, so such a ring
/// encloses all of it. The centroid of the jammed positions
/// becomes the circle center; it then orbits that center so teammates can
/// localize the jammer from its trajectory. The probe path is rectilinear so
/// that it is never mistaken for the orbit.
class CircularEvader {
public:
    enum class Phase { Probe, Orbit };

    CircularEvader(const Vec2& attack_position, const Vec2& probe_origin, double jam_distance,
                   const CircularModeConfig& cfg, double dt, double u_max)
        : cfg_(cfg), dt_(dt), u_max_(u_max), jam_distance_(jam_distance), attack_(attack_position),
          origin_(probe_origin), corner_(probe_origin) {
        radius_ = std::clamp(cfg.radius > 0.0 ? cfg.radius : jam_distance, cfg.radius_min, cfg.radius_max);
        attack_extent_ = (attack_position - origin_).lpNorm<Eigen::Infinity>();
    }

    Phase phase() const { return phase_; }
    const Vec2& center() const { return center_; }
    double radius() const { return radius_; }
    double jam_distance() const { return jam_distance_; }
    std::span<const JamSample> history() const { return history_; }

    /// Records whether the jammer reaches the robot at its current position.
    /// Samples on the approach to the spiral origin are not kept; they would
    /// overweight the attack side.
    void record(const Vec2& position, bool jammed) {
        if (phase_ != Phase::Probe || leg_ == 0) return;
        history_.push_back({position, jammed});
        if (jammed) ++jammed_leg_;
    }

    Vec2 control(const Vec2& pos) {
        if (phase_ == Phase::Probe && (corner_ - pos).norm() <= 1e-6) {
            // The first "leg" is the approach to the spiral origin.
            const bool clear = jammed_leg_ <= 1 && leg_ > 0 && leg_offset() > attack_extent_;
            clear_legs_ = clear ? clear_legs_ + 1 : 0;
            jammed_leg_ = 0;
            next_corner();
            if (clear_legs_ >= 4 || (corner_ - origin_).lpNorm<Eigen::Infinity>() > cfg_.probe_max_radius) {
                const bool any = std::any_of(history_.begin(), history_.end(), [](const JamSample& j) { return j.jammed; });
                center_ = any ? estimate_attacker_center(history_) : attack_;
                phase_ = Phase::Orbit;
            }
        }
        if (phase_ == Phase::Probe) return clamp_norm((corner_ - pos) / dt_, u_max_);
        return circular_mode_control(center_, radius_, pos, orbit_rate(), cfg_.radial_gain, u_max_);
    }

    double orbit_rate() const { return std::min(cfg_.angular_rate, 0.9 * u_max_ / radius_); }

private:
    // Distance of the current leg's line from the spiral origin.
    double leg_offset() const {
        const Vec2 d = corner_ - origin_;
        return (leg_ - 1) % 2 == 0 ? std::abs(d.y()) : std::abs(d.x());
    }

    // Legs run east, north, west, south with lengths s, s, 2s, 2s, 3s, ...
    void next_corner() {
        static const Vec2 dirs[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
        ++leg_;
        corner_ += cfg_.probe_spacing * ((leg_ - 1) / 2 + 1) * dirs[(leg_ - 1) % 4];
    }

    CircularModeConfig cfg_;
    double dt_;
    double u_max_;
    double jam_distance_;
    Vec2 attack_;
    Vec2 origin_;
    Vec2 corner_;
    Phase phase_ = Phase::Probe;
    int leg_ = 0;
    int clear_legs_ = 0;
    int jammed_leg_ = 0;  // jammed samples on the current leg
    double attack_extent_ = 0.0;
    std::vector<JamSample> history_;
    Vec2 center_ = Vec2::Zero();
    double radius_ = 0.0;
};

}  // namespace rtrack
