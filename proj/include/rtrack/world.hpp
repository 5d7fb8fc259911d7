#pragma once

#include <algorithm>
#include <climits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rtrack/types.hpp"

namespace rtrack {

struct FailureStatus {
    Capability sensing = Capability::Ok;
    Capability comm = Capability::Ok;

    bool healthy() const { return sensing == Capability::Ok && comm == Capability::Ok; }
    bool operator==(const FailureStatus&) const = default;
};

struct RobotState {
    int id = 0;
    Vec2 position = Vec2::Zero();
    FailureStatus status;
    int cooldown_remaining = 0;
    // Zone ids that triggered the current sensing/comm failure (-1 if none).
    int sensing_trigger = -1;
    int comm_trigger = -1;
};

struct TargetState {
    int id = 0;
    Vec4 state = Vec4::Zero();  // [px, py, vx, vy]
    int waypoint_index = 0;

    Vec2 position() const { return state.head<2>(); }
    Vec2 velocity() const { return state.tail<2>(); }
};

/// Stacked belief over all targets: mean is 4N, covariance 4N x 4N.
struct TargetEstimate {
    Vec mean;
    Mat covariance;

    int targets() const { return static_cast<int>(mean.size() / 4); }
    Vec2 position(int j) const { return mean.segment<2>(4 * j); }
    bool operator==(const TargetEstimate& o) const {
        return mean.size() == o.mean.size() && covariance.rows() == o.covariance.rows() &&
               mean == o.mean && covariance == o.covariance;
    }
};

struct SensingZone {
    int id = 0;
    Vec2 mean_center = Vec2::Zero();
    Mat2 center_cov = Mat2::Zero();
    double radius = 1.0;
    FailureKind kind = FailureKind::Temporary;
};

struct CommZone {
    int id = 0;
    Vec2 mean_center = Vec2::Zero();
    Mat2 center_cov = Mat2::Zero();
    double delta2 = 0.5;
    FailureKind kind = FailureKind::Temporary;
};

enum class Provenance { CircleFit = 0, TrueParams = 1 };

/// What a robot knows about one zone. Sensing records use `radius`; comm
/// records from true parameters use `delta2`; comm records from a circle fit
/// carry the fitted radius and a zero center covariance.
struct ZoneRecord {
    int zone_id = 0;
    Vec2 center = Vec2::Zero();
    Mat2 center_cov = Mat2::Zero();
    double radius = 0.0;
    double delta2 = 0.0;
    Provenance provenance = Provenance::TrueParams;
    int revision = 0;

    bool operator==(const ZoneRecord&) const = default;
};

inline ZoneRecord reveal(const SensingZone& z) {
    return {z.id, z.mean_center, z.center_cov, z.radius, 0.0, Provenance::TrueParams, 0};
}

inline ZoneRecord reveal(const CommZone& z) {
    return {z.id, z.mean_center, z.center_cov, 0.0, z.delta2, Provenance::TrueParams, 0};
}

using ZoneMap = std::map<int, ZoneRecord>;

struct ZoneKnowledge {
    ZoneMap sensing;
    ZoneMap comm;

    bool operator==(const ZoneKnowledge&) const = default;
};

struct KnowledgeBase {
    std::vector<ZoneKnowledge> robots;
    ZoneKnowledge league;

    bool operator==(const KnowledgeBase&) const = default;
};

struct WorldState {
    int t = 0;
    std::vector<RobotState> robots;
    std::vector<TargetState> targets;
    std::vector<SensingZone> sensing_zones;
    std::vector<CommZone> comm_zones;
    KnowledgeBase knowledge;
    TargetEstimate estimate_league;
    std::map<int, TargetEstimate> estimate_solo;
    // Center realization of each comm zone at the latest activation tick.
    std::vector<Vec2> comm_center_samples;

    int robot_count() const { return static_cast<int>(robots.size()); }
    int target_count() const { return static_cast<int>(targets.size()); }
};

namespace detail {

inline bool is_psd2(const Mat2& m, double tol = 1e-12) {
    if (!m.allFinite() || std::abs(m(0, 1) - m(1, 0)) > tol) return false;
    Eigen::SelfAdjointEigenSolver<Mat2> es(symmetrized(m));
    return es.eigenvalues().minCoeff() >= -tol;
}

inline void check_estimate(const TargetEstimate& e, const std::string& name, int n_targets,
                           std::vector<std::string>& out) {
    const auto dim = static_cast<Eigen::Index>(4 * n_targets);
    if (e.mean.size() != dim || e.covariance.rows() != dim || e.covariance.cols() != dim) {
        out.push_back(name + ": dimension mismatch");
        return;
    }
    if (!e.mean.allFinite() || !e.covariance.allFinite()) {
        out.push_back(name + ": non-finite entries");
        return;
    }
    if ((e.covariance - e.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        out.push_back(name + ": covariance not symmetric");
        return;
    }
    if (dim > 0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(e.covariance));
        if (es.eigenvalues().minCoeff() <= 0.0) out.push_back(name + ": covariance not positive definite");
    }
}

}  // namespace detail

/// Checks every type invariant; returns one description per violation.
inline std::vector<std::string> validate_world(const WorldState& w, int cooldown_length = INT_MAX) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < w.robots.size(); ++i) {
        const auto& r = w.robots[i];
        const std::string name = "robot " + std::to_string(r.id);
        if (r.id != static_cast<int>(i)) out.push_back(name + ": id not contiguous");
        if (!r.position.allFinite()) out.push_back(name + ": non-finite position");
        if (r.cooldown_remaining < 0 || r.cooldown_remaining > cooldown_length)
            out.push_back(name + ": cooldown_remaining out of range");
    }
    for (std::size_t j = 0; j < w.targets.size(); ++j) {
        if (w.targets[j].id != static_cast<int>(j))
            out.push_back("target " + std::to_string(w.targets[j].id) + ": id not contiguous");
        if (!w.targets[j].state.allFinite())
            out.push_back("target " + std::to_string(w.targets[j].id) + ": non-finite state");
    }
    for (const auto& z : w.sensing_zones) {
        const std::string name = "sensing zone " + std::to_string(z.id);
        if (!(z.radius > 0.0)) out.push_back(name + ": radius must be positive");
        if (!detail::is_psd2(z.center_cov)) out.push_back(name + ": center covariance not symmetric PSD");
    }
    for (const auto& z : w.comm_zones) {
        const std::string name = "comm zone " + std::to_string(z.id);
        if (!(z.delta2 > 0.0)) out.push_back(name + ": delta2 must be positive");
        if (!detail::is_psd2(z.center_cov)) out.push_back(name + ": center covariance not symmetric PSD");
    }
    if (!w.knowledge.robots.empty() && w.knowledge.robots.size() != w.robots.size())
        out.push_back("knowledge base: robot count mismatch");
    detail::check_estimate(w.estimate_league, "league estimate", w.target_count(), out);
    for (const auto& [id, est] : w.estimate_solo)
        detail::check_estimate(est, "solo estimate of robot " + std::to_string(id), w.target_count(), out);
    return out;
}

using Adjacency = std::vector<std::vector<bool>>;

/// Connected components of the comm graph, each sorted, ordered by smallest
/// member. Components of size >= 2 are leagues; singletons are isolated.
inline std::vector<std::vector<int>> league_members(const WorldState& w, const Adjacency& graph) {
    const int m = w.robot_count();
    std::vector<int> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            if (graph[i][j]) {
                const int a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < m; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

namespace detail {

// TrueParams beats CircleFit; within a provenance the newer revision wins.
inline bool preferred(const ZoneRecord& a, const ZoneRecord& b) {
    if (a.provenance != b.provenance) return a.provenance > b.provenance;
    return a.revision > b.revision;
}

inline void merge_into(ZoneMap& dst, const ZoneMap& src) {
    for (const auto& [id, rec] : src) {
        auto it = dst.find(id);
        if (it == dst.end())
            dst.emplace(id, rec);
        else if (preferred(rec, it->second))
            it->second = rec;
    }
}

}  // namespace detail

/// Union-merges the members' zone knowledge; every member and the league set
/// end up with the union. Nothing is ever forgotten.
inline KnowledgeBase merge_knowledge(KnowledgeBase kb, std::span<const int> league) {
    ZoneKnowledge unioned;
    for (int id : league) {
        detail::merge_into(unioned.sensing, kb.robots.at(id).sensing);
        detail::merge_into(unioned.comm, kb.robots.at(id).comm);
    }
    for (int id : league) {
        detail::merge_into(kb.robots[id].sensing, unioned.sensing);
        detail::merge_into(kb.robots[id].comm, unioned.comm);
    }
    detail::merge_into(kb.league.sensing, unioned.sensing);
    detail::merge_into(kb.league.comm, unioned.comm);
    return kb;
}

}  // namespace rtrack
