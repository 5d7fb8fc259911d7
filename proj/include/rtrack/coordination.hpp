#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rtrack/circle_mode.hpp"
#include "rtrack/estimation.hpp"
#include "rtrack/rng.hpp"
#include "rtrack/types.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

enum class Mode { Centralized, Individual, Circular, Idle };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::Centralized: return "centralized";
    case Mode::Individual: return "individual";
    case Mode::Circular: return "circular";
    case Mode::Idle: return "idle";
    }
    return "?";
}

struct RobotDirective {
    int robot = 0;
    Mode mode = Mode::Centralized;
    int league = -1;  // index into the component list when Centralized

    bool operator==(const RobotDirective&) const = default;
};

/// Edge (i, j) iff both endpoints can communicate.
inline Adjacency build_comm_graph(const WorldState& w) {
    const int m = w.robot_count();
    Adjacency g(m, std::vector<bool>(m, false));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            g[i][j] = i != j && w.robots[i].status.comm == Capability::Ok && w.robots[j].status.comm == Capability::Ok;
    return g;
}

struct DispatchConfig {
    bool vanilla = false;
};

/// One directive per robot. Leagues plan jointly; isolated robots plan alone,
/// except that a permanently disconnected robot switches to circular mode.
/// The baseline never circles; it idles a blind isolated robot instead.
inline std::vector<RobotDirective> dispatch(const WorldState& w, std::span<const std::vector<int>> components,
                                            const DispatchConfig& cfg = {}) {
    std::vector<RobotDirective> out(w.robots.size());
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (int id : components[c]) {
            auto& d = out[id];
            d.robot = id;
            const auto& st = w.robots[id].status;
            if (components[c].size() >= 2) {
                d.mode = Mode::Centralized;
                d.league = static_cast<int>(c);
            } else if (cfg.vanilla) {
                d.mode = st.sensing == Capability::PermFailed ? Mode::Idle : Mode::Individual;
            } else {
                d.mode = st.comm == Capability::PermFailed ? Mode::Circular : Mode::Individual;
            }
        }
    }
    return out;
}

struct PeerObservation {
    int observer = 0;
    int observed = 0;
    Vec2 position = Vec2::Zero();
    int step = 0;
};

/// Every sensing-capable robot observes every robot outside its own league.
inline std::vector<PeerObservation> observe_peers(const WorldState& w, std::span<const std::vector<int>> components,
                                                  double sigma_peer, RngStream& rng) {
    std::vector<int> component_of(w.robots.size(), -1);
    for (std::size_t c = 0; c < components.size(); ++c)
        for (int id : components[c]) component_of[id] = static_cast<int>(c);
    std::vector<PeerObservation> out;
    for (const auto& obs : w.robots) {
        if (obs.status.sensing != Capability::Ok) continue;
        for (const auto& other : w.robots) {
            if (other.id == obs.id || component_of[other.id] == component_of[obs.id]) continue;
            Vec2 p = other.position;
            if (sigma_peer > 0.0) {
                const double nx = rng.normal(), ny = rng.normal();
                p += sigma_peer * Vec2(nx, ny);
            }
            out.push_back({obs.id, other.id, p, w.t});
        }
    }
    return out;
}

/// Sliding windows of the last W observed positions per (observer, observed).
class ObservationBuffers {
public:
    explicit ObservationBuffers(std::size_t window = 30) : window_(window) {}

    void add(const PeerObservation& o) {
        auto& buf = buffers_[{o.observer, o.observed}];
        buf.push_back(o.position);
        while (buf.size() > window_) buf.pop_front();
    }

    /// Forgets the trajectory of `observed` as seen by `observer`.
    void drop(int observer, int observed) { buffers_.erase({observer, observed}); }

    std::size_t window() const { return window_; }
    const std::map<std::pair<int, int>, std::deque<Vec2>>& buffers() const { return buffers_; }

private:
    std::size_t window_;
    std::map<std::pair<int, int>, std::deque<Vec2>> buffers_;
};

/// Ids of comm zones inferred from circle fits start here, apart from the
/// ids of zones revealed with true parameters.
inline constexpr int kInferredZoneBase = 1000;

struct ZoneInference {
    int observer = 0;
    int observed = 0;
    ZoneRecord record;
};

/// Fits a circle to every full buffer. Accepted fits become CircleFit comm
/// zone records; a fit whose center lies within `dedup_frac * radius` of an
/// existing inferred record updates that record instead of adding one.
inline std::vector<ZoneInference> infer_zone_from_circle(const ObservationBuffers& buffers,
                                                         const KnowledgeBase& kb, const CircleAcceptance& accept,
                                                         double dedup_frac = 0.5) {
    std::vector<ZoneInference> out;
    std::vector<ZoneRecord> known;
    for (const auto& rk : kb.robots)
        for (const auto& [id, rec] : rk.comm)
            if (rec.provenance == Provenance::CircleFit) known.push_back(rec);
    for (const auto& [id, rec] : kb.league.comm)
        if (rec.provenance == Provenance::CircleFit) known.push_back(rec);

    for (const auto& [key, buf] : buffers.buffers()) {
        if (buf.size() < buffers.window()) continue;
        const std::vector<Vec2> pts(buf.begin(), buf.end());
        const auto fit = estimate_circle(pts, accept);
        if (!fit) continue;
        ZoneRecord rec;
        rec.center = fit->center;
        rec.radius = fit->radius;
        rec.provenance = Provenance::CircleFit;
        int next_id = kInferredZoneBase;
        const ZoneRecord* match = nullptr;
        for (const auto& k : known) {
            next_id = std::max(next_id, k.zone_id + 1);
            if (!match && (k.center - fit->center).norm() <= dedup_frac * std::max(k.radius, fit->radius)) match = &k;
        }
        if (match) {
            rec.zone_id = match->zone_id;
            rec.revision = match->revision + 1;
        } else {
            rec.zone_id = next_id;
        }
        // Later buffers in the same pass see this record too.
        auto it = std::find_if(known.begin(), known.end(), [&](const ZoneRecord& k) { return k.zone_id == rec.zone_id; });
        if (it != known.end())
            *it = rec;
        else
            known.push_back(rec);
        out.push_back({key.first, key.second, rec});
    }
    return out;
}

/// CI-fuses a returning robot's solo belief into the league belief.
inline CiResult on_reconnect(const TargetEstimate& league_estimate, const TargetEstimate& solo_estimate) {
    return ci_fuse(league_estimate, solo_estimate);
}

/// Robots with any failed capability.
inline int count_attacked(const WorldState& w) {
    int m = 0;
    for (const auto& r : w.robots)
        if (!r.status.healthy()) ++m;
    return m;
}

}  // namespace rtrack
