#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtrack/simulator.hpp"

namespace rtrack {

// Hand-placed layouts; only the zone parameters that the scenarios name
// (centers, covariances, team sizes, durations, risk levels) are fixed, the
// rest is chosen to reproduce the qualitative behavior.
namespace presets {

inline Vec4 at(double x, double y) { return Vec4(x, y, 0.0, 0.0); }

inline SensingZone sensing_zone(int id, Vec2 mean, double var, double radius, FailureKind kind) {
    return {id, mean, var * Mat2::Identity(), radius, kind};
}

inline CommZone comm_zone(int id, Vec2 mean, double var, double delta2, FailureKind kind) {
    return {id, mean, var * Mat2::Identity(), delta2, kind};
}

// Three robots and three loitering targets, no zones. Configurations without
// a preset start here.
inline ScenarioConfig basic() {
    ScenarioConfig c;
    c.name = "default";
    c.robot_positions = {{-4.0, -1.0}, {5.5, 1.0}, {1.0, 6.5}};
    c.target_states = {at(-3.0, 1.0), at(4.5, -1.0), at(0.0, 5.5)};
    c.target_waypoints = {
        {{-0.6, 0.4}, {-0.3, -0.7}, {-0.9, 0.0}},
        {{0.7, -0.4}, {0.4, 0.7}, {1.0, 0.0}},
        {{0.0, 0.7}, {-0.6, -0.4}, {0.6, -0.4}},
    };
    return c;
}

// One sensing zone around (0.1, 0); targets reach it one after another.
inline ScenarioConfig sensing(FailureKind kind) {
    ScenarioConfig c = basic();
    c.name = kind == FailureKind::Temporary ? "sensing-temp" : "sensing-perm";
    c.sensing_zones = {sensing_zone(0, {0.1, 0.0}, 0.3, 1.5, kind)};
    return c;
}

// One comm zone at the origin; target 1 leads robot 1 across it early while
// the others stay well clear.
inline ScenarioConfig comm(FailureKind kind) {
    ScenarioConfig c;
    c.name = kind == FailureKind::Temporary ? "comm-temp" : "comm-perm";
    c.robot_positions = {{-3.0, 2.5}, {-2.5, -1.0}, {3.0, 2.5}};
    c.target_states = {at(-3.0, 3.2), at(-1.6, -0.5), at(3.0, 3.2)};
    c.target_waypoints = {
        {{-2.5, 3.0}, {-3.5, 3.5}},
        {{0.0, 0.0}, {3.0, -4.0}, {5.0, -5.0}},
        {{2.5, 3.0}, {3.5, 3.5}},
    };
    c.comm_zones = {comm_zone(0, {0.0, 0.0}, 0.01, 0.25, kind)};
    return c;
}

// Two sensing zones and one comm zone. The outer targets loiter inside the
// sensing zones; the middle one patrols just south of the comm zone.
inline ScenarioConfig combined(FailureKind kind) {
    ScenarioConfig c;
    c.name = kind == FailureKind::Temporary ? "combined-temp" : "combined-perm";
    c.robot_positions = {{-4.5, 1.5}, {0.0, -2.5}, {4.5, 1.5}};
    c.target_states = {at(-4.5, 2.5), at(-1.0, -1.8), at(4.5, 2.5)};
    c.target_waypoints = {
        {{-3.4, 0.3}, {-2.6, -0.3}, {-3.0, 0.4}},
        {{1.0, -1.8}, {-1.0, -1.8}},
        {{3.4, 0.3}, {2.6, -0.3}, {3.0, 0.4}},
    };
    c.sensing_zones = {sensing_zone(0, {-3.0, 0.0}, 0.3, 1.2, kind), sensing_zone(1, {3.0, 0.0}, 0.3, 1.2, kind)};
    c.comm_zones = {comm_zone(2, {0.0, 0.0}, 0.01, 0.25, kind)};
    return c;
}

// Robots on a ring, targets circulating between two permanent sensing zones.
inline ScenarioConfig vary_team(int m, int n) {
    ScenarioConfig c;
    c.name = "vary-team(" + std::to_string(m) + "," + std::to_string(n) + ")";
    for (int i = 0; i < m; ++i) {
        const double a = 2.0 * std::numbers::pi * i / m + 0.3;
        c.robot_positions.push_back({5.0 * std::cos(a), 5.0 * std::sin(a)});
    }
    for (int j = 0; j < n; ++j) {
        const double a = 2.0 * std::numbers::pi * j / n;
        const Vec2 p(3.0 * std::cos(a), 3.0 * std::sin(a));
        c.target_states.push_back(at(p.x(), p.y()));
        const double b = a + std::numbers::pi / 2.0;
        c.target_waypoints.push_back({p, Vec2(3.0 * std::cos(b), 3.0 * std::sin(b)), Vec2(0.0, 0.0)});
    }
    c.sensing_zones = {sensing_zone(0, {-3.0, 0.0}, 0.3, 1.0, FailureKind::Permanent),
                       sensing_zone(1, {3.0, 0.0}, 0.3, 1.0, FailureKind::Permanent)};
    return c;
}

enum class RiskLevel { Risky, Regular, Conservative };

inline const char* to_string(RiskLevel r) {
    switch (r) {
    case RiskLevel::Risky: return "risky";
    case RiskLevel::Regular: return "regular";
    case RiskLevel::Conservative: return "conservative";
    }
    return "?";
}

inline double eps1_for(RiskLevel r) {
    switch (r) {
    case RiskLevel::Risky: return 0.05;
    case RiskLevel::Regular: return 0.02;
    case RiskLevel::Conservative: return 0.01;
    }
    return 0.05;
}

// Three permanent sensing zones, four robots, four targets, 600 steps. The
// targets travel as a loose convoy and loiter inside each zone in turn. The
// attack floor is lowered below every eps1 so that a robot holding its chance
// constraint still runs a small per-tick risk that grows with eps1.
inline ScenarioConfig complex_env(RiskLevel risk) {
    ScenarioConfig c;
    c.name = std::string("complex-env(") + to_string(risk) + ")";
    c.steps = 600;
    c.risk.eps1 = eps1_for(risk);
    c.hazard.delta1 = 0.005;
    const Vec2 zones[3] = {{-3.0, -1.0}, {3.0, -1.0}, {0.0, 2.5}};
    const Vec2 loiter[3] = {{-0.4, 0.3}, {0.4, 0.3}, {0.0, -0.4}};
    for (int j = 0; j < 4; ++j) {
        const double dy = -1.2 + 0.8 * j;
        c.target_states.push_back(at(-5.5, -1.0 + dy));
        c.robot_positions.push_back({-7.0, -1.0 + 1.2 * dy});
        std::vector<Vec2> w;
        for (const auto& z : zones)
            for (int l = 0; l < 3; ++l) w.push_back(z + loiter[(l + j) % 3]);
        c.target_waypoints.push_back(std::move(w));
    }
    for (int k = 0; k < 3; ++k) c.sensing_zones.push_back(sensing_zone(k, zones[k], 0.3, 1.2, FailureKind::Permanent));
    return c;
}

}  // namespace presets

inline std::vector<std::string> preset_names() {
    return {"default", "sensing-temp",  "sensing-perm",  "comm-temp",           "comm-perm",
            "combined-temp", "combined-perm", "vary-team(M,N)",      "complex-env(risky)",
            "complex-env(regular)", "complex-env(conservative)"};
}

/// Looks a preset up by name; vary-team takes its sizes as "vary-team(M,N)".
inline ScenarioConfig preset(std::string_view name) {
    using presets::RiskLevel;
    if (name == "default") return presets::basic();
    if (name == "sensing-temp") return presets::sensing(FailureKind::Temporary);
    if (name == "sensing-perm") return presets::sensing(FailureKind::Permanent);
    if (name == "comm-temp") return presets::comm(FailureKind::Temporary);
    if (name == "comm-perm") return presets::comm(FailureKind::Permanent);
    if (name == "combined-temp") return presets::combined(FailureKind::Temporary);
    if (name == "combined-perm") return presets::combined(FailureKind::Permanent);
    if (name == "complex-env(risky)") return presets::complex_env(RiskLevel::Risky);
    if (name == "complex-env(regular)") return presets::complex_env(RiskLevel::Regular);
    if (name == "complex-env(conservative)") return presets::complex_env(RiskLevel::Conservative);
    constexpr std::string_view vt = "vary-team(";
    if (name.starts_with(vt) && name.ends_with(")")) {
        const std::string args(name.substr(vt.size(), name.size() - vt.size() - 1));
        const auto comma = args.find(',');
        if (comma != std::string::npos) {
            try {
                std::size_t p1 = 0, p2 = 0;
                const int m = std::stoi(args.substr(0, comma), &p1);
                const int n = std::stoi(args.substr(comma + 1), &p2);
                if (p1 == comma && p2 == args.size() - comma - 1 && m >= 2 && m <= 5 && n >= 3 && n <= 5)
                    return presets::vary_team(m, n);
            } catch (const std::exception&) {
            }
        }
    }
    throw ConfigError("unknown preset '" + std::string(name) + "'", 0, "scenario.preset");
}

/// The team-size sweep: M in 2..5, N in 3..5.
inline std::vector<std::pair<int, int>> vary_team_sweep() {
    std::vector<std::pair<int, int>> out;
    for (int m = 2; m <= 5; ++m)
        for (int n = 3; n <= 5; ++n) out.emplace_back(m, n);
    return out;
}

}  // namespace rtrack
