#pragma once

#include <limits>
#include <vector>

#include "rtrack/rng.hpp"
#include "rtrack/types.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

struct HazardConfig {
    int activation_period_steps = 10;  // 1 Hz at dt = 0.1 s
    double delta1 = 0.1;               // sensing probability floor
    int mc_samples = 2000;
};

enum class AttackKind { Sensing, Comm };
enum class Transition { Attacked, Recovered };

struct AttackEvent {
    int step = 0;
    int robot = 0;
    AttackKind kind = AttackKind::Sensing;
    int zone = 0;
    Transition transition = Transition::Attacked;

    bool operator==(const AttackEvent&) const = default;
};

inline const char* to_string(AttackKind k) { return k == AttackKind::Sensing ? "sensing" : "comm"; }
inline const char* to_string(Transition t) { return t == Transition::Attacked ? "attacked" : "recovered"; }

/// Draws one center realization from N(mean, cov).
inline Vec2 sample_center(const Vec2& mean, const Mat2& cov, RngStream& rng) {
    const double z0 = rng.normal(), z1 = rng.normal();
    Eigen::SelfAdjointEigenSolver<Mat2> es(symmetrized(cov));
    const Mat2 root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return mean + root * Vec2(z0, z1);
}

/// Monte Carlo estimate of P(|x - X| <= r), X ~ N(mu, Sigma).
inline double attack_probability_sensing(const Vec2& robot_pos, const SensingZone& zone, int mc_samples,
                                         RngStream& rng) {
    if (mc_samples < 1) throw DomainError("mc_samples must be >= 1");
    Eigen::SelfAdjointEigenSolver<Mat2> es(symmetrized(zone.center_cov));
    const Mat2 root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const double r2 = zone.radius * zone.radius;
    int inside = 0;
    for (int s = 0; s < mc_samples; ++s) {
        const double z0 = rng.normal(), z1 = rng.normal();
        const Vec2 c = zone.mean_center + root * Vec2(z0, z1);
        if ((robot_pos - c).squaredNorm() <= r2) ++inside;
    }
    return static_cast<double>(inside) / mc_samples;
}

/// True iff |x_i - c| <= delta2 |x_i - x_j| (boundary inclusive).
inline bool jam_condition(const Vec2& robot_pos, const Vec2& peer_pos, const CommZone& zone,
                          const Vec2& center_sample) {
    return (robot_pos - center_sample).norm() <= zone.delta2 * (robot_pos - peer_pos).norm();
}

/// Index of the robot nearest to `i` (any status), or -1 if alone.
inline int nearest_peer(const std::vector<RobotState>& robots, int i) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& r : robots) {
        if (r.id == i) continue;
        const double d = (r.position - robots[i].position).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = r.id;
        }
    }
    return best;
}

struct ZoneReveal {
    int robot = 0;
    AttackKind kind = AttackKind::Sensing;
    int zone = 0;
};

struct TickResult {
    std::vector<RobotState> robots;  // statuses and triggers updated
    std::vector<AttackEvent> events;
    std::vector<ZoneReveal> reveals;
    std::vector<Vec2> comm_center_samples;
};

namespace detail {

inline Capability failed_status(FailureKind k) {
    return k == FailureKind::Permanent ? Capability::PermFailed : Capability::TempFailed;
}

// First sensing zone that fires for this robot, or -1.
inline int sensing_fires(const Vec2& pos, const std::vector<SensingZone>& zones, const HazardConfig& cfg,
                         RngStream& rng, const SensingZone** fired) {
    for (const auto& z : zones) {
        const double p = attack_probability_sensing(pos, z, cfg.mc_samples, rng);
        if (p >= cfg.delta1 && rng.bernoulli(p)) {
            *fired = &z;
            return z.id;
        }
    }
    return -1;
}

inline int comm_fires(const std::vector<RobotState>& robots, int i, const std::vector<CommZone>& zones,
                      const std::vector<Vec2>& samples, const CommZone** fired) {
    const int j = nearest_peer(robots, i);
    if (j < 0) return -1;
    for (std::size_t k = 0; k < zones.size(); ++k)
        if (jam_condition(robots[i].position, robots[j].position, zones[k], samples[k])) {
            *fired = &zones[k];
            return zones[k].id;
        }
    return -1;
}

}  // namespace detail

/// One activation of all danger zones. Ok robots may be attacked; temporarily
/// failed robots recover iff their condition does not fire again; permanent
/// failures never change. A sensing attack reveals the zone to the attacked
/// robot at once; a comm zone is revealed to its victim on recovery.
inline TickResult activation_tick(const WorldState& w, const HazardConfig& cfg, RngStream& rng) {
    TickResult out;
    out.robots = w.robots;
    for (const auto& z : w.comm_zones) out.comm_center_samples.push_back(sample_center(z.mean_center, z.center_cov, rng));

    for (auto& r : out.robots) {
        const SensingZone* fired = nullptr;
        switch (r.status.sensing) {
        case Capability::Ok:
            if (detail::sensing_fires(r.position, w.sensing_zones, cfg, rng, &fired) >= 0) {
                r.status.sensing = detail::failed_status(fired->kind);
                r.sensing_trigger = fired->id;
                out.events.push_back({w.t, r.id, AttackKind::Sensing, fired->id, Transition::Attacked});
                out.reveals.push_back({r.id, AttackKind::Sensing, fired->id});
            }
            break;
        case Capability::TempFailed:
            if (detail::sensing_fires(r.position, w.sensing_zones, cfg, rng, &fired) >= 0) {
                r.sensing_trigger = fired->id;
            } else {
                r.status.sensing = Capability::Ok;
                out.events.push_back({w.t, r.id, AttackKind::Sensing, r.sensing_trigger, Transition::Recovered});
                out.reveals.push_back({r.id, AttackKind::Sensing, r.sensing_trigger});
                r.sensing_trigger = -1;
            }
            break;
        case Capability::PermFailed:
            break;
        }
    }

    // Comm conditions are evaluated on positions at the start of the tick.
    const std::vector<RobotState> before = out.robots;
    for (auto& r : out.robots) {
        const CommZone* fired = nullptr;
        switch (r.status.comm) {
        case Capability::Ok:
            if (detail::comm_fires(before, r.id, w.comm_zones, out.comm_center_samples, &fired) >= 0) {
                r.status.comm = detail::failed_status(fired->kind);
                r.comm_trigger = fired->id;
                out.events.push_back({w.t, r.id, AttackKind::Comm, fired->id, Transition::Attacked});
            }
            break;
        case Capability::TempFailed:
            if (detail::comm_fires(before, r.id, w.comm_zones, out.comm_center_samples, &fired) >= 0) {
                r.comm_trigger = fired->id;
            } else {
                r.status.comm = Capability::Ok;
                out.events.push_back({w.t, r.id, AttackKind::Comm, r.comm_trigger, Transition::Recovered});
                out.reveals.push_back({r.id, AttackKind::Comm, r.comm_trigger});
                r.comm_trigger = -1;
            }
            break;
        case Capability::PermFailed:
            break;
        }
    }
    return out;
}

}  // namespace rtrack
