#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rtrack/presets.hpp"
#include "rtrack/simulator.hpp"

namespace rtrack {

// Flat configuration text: one `key = value` per line, `#` starts a comment,
// keys carry dotted section prefixes. `scenario.preset = NAME` selects the
// base scenario (the zone-free "default" preset when absent); every other
// key overrides one field of it. Lists are sized
// with `robots.count`, `targets.count`, `sensing.count`, `comm.count` and
// filled through indexed keys such as `robots.0.position = -4, -1`.

namespace config_detail {

struct BadValue {
    std::string message;
};

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s) {
    s = trim(s);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw BadValue{"not a number: '" + std::string(s) + "'"};
    return v;
}

inline std::vector<double> parse_list(std::string_view s, std::size_t expected) {
    std::vector<double> out;
    for (auto part : split(s, ',')) out.push_back(parse_number<double>(part));
    if (out.size() != expected)
        throw BadValue{"expected " + std::to_string(expected) + " comma-separated numbers, got " +
                       std::to_string(out.size())};
    return out;
}

inline bool parse_bool(std::string_view s) {
    s = trim(s);
    if (s == "true") return true;
    if (s == "false") return false;
    throw BadValue{"expected true or false"};
}

inline FailureKind parse_kind(std::string_view s) {
    s = trim(s);
    if (s == "temporary") return FailureKind::Temporary;
    if (s == "permanent") return FailureKind::Permanent;
    throw BadValue{"expected temporary or permanent"};
}

inline PlannerMode parse_mode(std::string_view s) {
    s = trim(s);
    if (s == "adaptive") return PlannerMode::Adaptive;
    if (s == "vanilla") return PlannerMode::Vanilla;
    throw BadValue{"expected adaptive or vanilla"};
}

}  // namespace config_detail

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

inline std::string format_list(std::initializer_list<double> vs) {
    std::string out;
    for (double v : vs) {
        if (!out.empty()) out += ", ";
        out += format_number(v);
    }
    return out;
}

namespace config_detail {

struct Field {
    std::string key;
    std::function<std::string(const ScenarioConfig&)> get;
    std::function<void(ScenarioConfig&, std::string_view)> set;
};

inline Field number(std::string key, double ScenarioConfig::*m) {
    return {std::move(key), [m](const ScenarioConfig& c) { return format_number(c.*m); },
            [m](ScenarioConfig& c, std::string_view v) { c.*m = parse_number<double>(v); }};
}

template <class S>
Field nested(std::string key, S ScenarioConfig::*s, double S::*m) {
    return {std::move(key), [s, m](const ScenarioConfig& c) { return format_number(c.*s.*m); },
            [s, m](ScenarioConfig& c, std::string_view v) { c.*s.*m = parse_number<double>(v); }};
}

template <class S>
Field nested_int(std::string key, S ScenarioConfig::*s, int S::*m) {
    return {std::move(key), [s, m](const ScenarioConfig& c) { return format_number(c.*s.*m); },
            [s, m](ScenarioConfig& c, std::string_view v) { c.*s.*m = parse_number<int>(v); }};
}

template <class S>
Field nested_bool(std::string key, S ScenarioConfig::*s, bool S::*m) {
    return {std::move(key), [s, m](const ScenarioConfig& c) { return std::string(c.*s.*m ? "true" : "false"); },
            [s, m](ScenarioConfig& c, std::string_view v) { c.*s.*m = parse_bool(v); }};
}

inline Field weight_set(std::string key, WeightSet AdaptiveWeightConfig::*m) {
    return {std::move(key),
            [m](const ScenarioConfig& c) {
                const auto& w = c.weights.*m;
                return format_list({w.w1, w.w2, w.w3, w.w4, w.w5});
            },
            [m](ScenarioConfig& c, std::string_view v) {
                const auto x = parse_list(v, 5);
                c.weights.*m = {x[0], x[1], x[2], x[3], x[4]};
            }};
}

inline const std::vector<Field>& scalar_fields() {
    using C = ScenarioConfig;
    static const std::vector<Field> fields = {
        {"scenario.name", [](const C& c) { return c.name; },
         [](C& c, std::string_view v) { c.name = std::string(trim(v)); }},
        {"scenario.steps", [](const C& c) { return format_number(c.steps); },
         [](C& c, std::string_view v) { c.steps = parse_number<int>(v); }},
        number("scenario.dt", &C::dt),
        {"scenario.seed", [](const C& c) { return format_number(c.seed); },
         [](C& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v); }},
        {"scenario.mode", [](const C& c) { return std::string(to_string(c.mode)); },
         [](C& c, std::string_view v) { c.mode = parse_mode(v); }},
        nested("risk.eps1", &C::risk, &RiskParams::eps1),
        nested("risk.eps2", &C::risk, &RiskParams::eps2),
        weight_set("weights.risky", &AdaptiveWeightConfig::risky),
        weight_set("weights.safe", &AdaptiveWeightConfig::safe),
        nested_int("weights.cooldown_length", &C::weights, &AdaptiveWeightConfig::cooldown_length),
        nested_int("hazard.activation_period_steps", &C::hazard, &HazardConfig::activation_period_steps),
        nested("hazard.delta1", &C::hazard, &HazardConfig::delta1),
        nested_int("hazard.mc_samples", &C::hazard, &HazardConfig::mc_samples),
        nested("noise.sigma_range", &C::noise, &NoiseParams::sigma_range),
        nested("noise.sigma_bearing", &C::noise, &NoiseParams::sigma_bearing),
        nested("noise.gamma", &C::noise, &NoiseParams::gamma),
        nested("noise.max_range", &C::noise, &NoiseParams::max_range),
        nested("noise.d_min", &C::noise, &NoiseParams::d_min),
        number("robot.u_max", &C::u_max),
        number("target.v_max", &C::target_v_max),
        number("target.kp", &C::target_kp),
        number("target.q_pos", &C::target_q_pos),
        number("target.q_vel", &C::target_q_vel),
        number("filter.q_pos", &C::filter_q_pos),
        number("filter.q_vel", &C::filter_q_vel),
        number("estimate.init_pos_sigma", &C::init_pos_sigma),
        number("estimate.init_cov", &C::init_cov),
        number("coordination.sigma_peer", &C::sigma_peer),
        {"coordination.window", [](const C& c) { return format_number(c.observation_window); },
         [](C& c, std::string_view v) { c.observation_window = parse_number<int>(v); }},
        nested("circle.residual_frac", &C::circle_accept, &CircleAcceptance::residual_frac),
        nested("circle.min_arc", &C::circle_accept, &CircleAcceptance::min_arc),
        nested("circular.angular_rate", &C::circular, &CircularModeConfig::angular_rate),
        nested("circular.radial_gain", &C::circular, &CircularModeConfig::radial_gain),
        nested("circular.radius", &C::circular, &CircularModeConfig::radius),
        nested("circular.radius_min", &C::circular, &CircularModeConfig::radius_min),
        nested("circular.radius_max", &C::circular, &CircularModeConfig::radius_max),
        nested("circular.probe_spacing", &C::circular, &CircularModeConfig::probe_spacing),
        nested("circular.probe_max_radius", &C::circular, &CircularModeConfig::probe_max_radius),
        nested_int("solver.max_iter", &C::solver, &SolverConfig::max_iter),
        nested("solver.tol", &C::solver, &SolverConfig::tol),
        nested("solver.fd_step", &C::solver, &SolverConfig::fd_step),
        nested_bool("ekf.joseph_form", &C::ekf, &EkfConfig::joseph_form),
        nested_bool("ekf.symmetrize_each_step", &C::ekf, &EkfConfig::symmetrize_each_step),
        {"ekf.innovation_gate",
         [](const C& c) { return c.ekf.innovation_gate ? format_number(*c.ekf.innovation_gate) : std::string("none"); },
         [](C& c, std::string_view v) {
             if (trim(v) == "none")
                 c.ekf.innovation_gate.reset();
             else
                 c.ekf.innovation_gate = parse_number<double>(v);
         }},
    };
    return fields;
}

inline std::string format_cov(const Mat2& m) { return format_list({m(0, 0), m(0, 1), m(1, 0), m(1, 1)}); }

inline Mat2 parse_cov(std::string_view v) {
    const auto x = parse_list(v, 4);
    Mat2 m;
    m << x[0], x[1], x[2], x[3];
    return m;
}

inline std::string format_waypoints(const std::vector<Vec2>& w) {
    std::string out;
    for (const auto& p : w) {
        if (!out.empty()) out += "; ";
        out += format_list({p.x(), p.y()});
    }
    return out;
}

inline std::vector<Vec2> parse_waypoints(std::string_view v) {
    std::vector<Vec2> out;
    if (trim(v).empty()) return out;
    for (auto part : split(v, ';')) {
        const auto x = parse_list(part, 2);
        out.emplace_back(x[0], x[1]);
    }
    return out;
}

// Sets one indexed list entry such as `sensing.1.radius`.
inline bool set_indexed(ScenarioConfig& c, std::string_view key, std::string_view value) {
    const auto parts = split(key, '.');
    if (parts.size() != 3) return false;
    const auto list = parts[0], field = parts[2];
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), idx);
    if (ec != std::errc() || ptr != parts[1].data() + parts[1].size()) return false;
    auto check = [&](std::size_t n) {
        if (idx >= n)
            throw BadValue{"index " + std::to_string(idx) + " is beyond " + std::string(list) + ".count = " +
                           std::to_string(n)};
    };
    if (list == "robots" && field == "position") {
        check(c.robot_positions.size());
        const auto x = parse_list(value, 2);
        c.robot_positions[idx] = Vec2(x[0], x[1]);
        return true;
    }
    if (list == "targets" && field == "state") {
        check(c.target_states.size());
        const auto x = parse_list(value, 4);
        c.target_states[idx] = Vec4(x[0], x[1], x[2], x[3]);
        return true;
    }
    if (list == "targets" && field == "waypoints") {
        check(c.target_states.size());
        c.target_waypoints.resize(c.target_states.size());
        c.target_waypoints[idx] = parse_waypoints(value);
        return true;
    }
    if (list == "sensing") {
        if (field != "id" && field != "mean" && field != "cov" && field != "radius" && field != "kind") return false;
        check(c.sensing_zones.size());
        auto& z = c.sensing_zones[idx];
        if (field == "id") z.id = parse_number<int>(value);
        if (field == "mean") {
            const auto x = parse_list(value, 2);
            z.mean_center = Vec2(x[0], x[1]);
        }
        if (field == "cov") z.center_cov = parse_cov(value);
        if (field == "radius") z.radius = parse_number<double>(value);
        if (field == "kind") z.kind = parse_kind(value);
        return true;
    }
    if (list == "comm") {
        if (field != "id" && field != "mean" && field != "cov" && field != "delta2" && field != "kind") return false;
        check(c.comm_zones.size());
        auto& z = c.comm_zones[idx];
        if (field == "id") z.id = parse_number<int>(value);
        if (field == "mean") {
            const auto x = parse_list(value, 2);
            z.mean_center = Vec2(x[0], x[1]);
        }
        if (field == "cov") z.center_cov = parse_cov(value);
        if (field == "delta2") z.delta2 = parse_number<double>(value);
        if (field == "kind") z.kind = parse_kind(value);
        return true;
    }
    return false;
}

inline bool set_count(ScenarioConfig& c, std::string_view key, std::string_view value) {
    auto count = [&] {
        const int n = parse_number<int>(value);
        if (n < 0) throw BadValue{"count must be >= 0"};
        return static_cast<std::size_t>(n);
    };
    if (key == "robots.count") {
        c.robot_positions.resize(count(), Vec2::Zero());
    } else if (key == "targets.count") {
        const auto n = count();
        c.target_states.resize(n, Vec4::Zero());
        c.target_waypoints.resize(n);
    } else if (key == "sensing.count") {
        const auto n = count();
        const auto old = c.sensing_zones.size();
        c.sensing_zones.resize(n);
        for (auto k = old; k < n; ++k) c.sensing_zones[k].id = static_cast<int>(k);
    } else if (key == "comm.count") {
        const auto n = count();
        const auto old = c.comm_zones.size();
        c.comm_zones.resize(n);
        for (auto k = old; k < n; ++k) c.comm_zones[k].id = static_cast<int>(k);
    } else {
        return false;
    }
    return true;
}

}  // namespace config_detail

/// Every scalar key accepted by parse_config, in canonical order.
inline std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : config_detail::scalar_fields()) out.push_back(f.key);
    return out;
}

/// Parses the flat configuration text. Errors carry the line number for
/// syntax and value problems and the key path for domain violations.
inline ScenarioConfig parse_config(std::string_view text) {
    using namespace config_detail;
    struct Entry {
        std::string key;
        std::string value;
        int line;
    };
    std::vector<Entry> entries;
    std::set<std::string> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key", line_no);
        if (!seen.insert(key).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'", line_no, key);
        entries.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
    }

    auto fail = [](const Entry& e, const std::string& msg) {
        return ConfigError("line " + std::to_string(e.line) + ": " + e.key + ": " + msg, e.line, e.key);
    };

    ScenarioConfig cfg = presets::basic();
    for (const auto& e : entries)
        if (e.key == "scenario.preset") {
            try {
                cfg = preset(e.value);
            } catch (const ConfigError& err) {
                throw fail(e, err.what());
            }
        }

    // Counts first so that indexed keys may appear in any order.
    for (const auto& e : entries) {
        try {
            set_count(cfg, e.key, e.value);
        } catch (const BadValue& b) {
            throw fail(e, b.message);
        }
    }

    const auto& fields = scalar_fields();
    for (const auto& e : entries) {
        if (e.key == "scenario.preset" || e.key.ends_with(".count")) continue;
        try {
            auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.key == e.key; });
            if (it != fields.end())
                it->set(cfg, e.value);
            else if (!set_indexed(cfg, e.key, e.value))
                throw fail(e, "unknown key");
        } catch (const BadValue& b) {
            throw fail(e, b.message);
        }
    }

    const auto issues = validate_scenario(cfg);
    if (!issues.empty()) {
        const auto& i = issues.front();
        int line = 0;
        for (const auto& e : entries)
            if (e.key == i.key) line = e.line;
        const std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
        throw ConfigError(where + i.key + ": " + i.message, line, i.key);
    }
    return cfg;
}

/// Canonical text: every key in fixed order, shortest round-trip numbers, no
/// comments. Parsing it reproduces the configuration exactly.
inline std::string serialize_config(const ScenarioConfig& c) {
    using namespace config_detail;
    std::string out;
    auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    for (const auto& f : scalar_fields()) line(f.key, f.get(c));

    line("robots.count", format_number(c.robot_count()));
    for (std::size_t i = 0; i < c.robot_positions.size(); ++i)
        line("robots." + std::to_string(i) + ".position",
             format_list({c.robot_positions[i].x(), c.robot_positions[i].y()}));

    line("targets.count", format_number(c.target_count()));
    for (std::size_t j = 0; j < c.target_states.size(); ++j) {
        const auto& s = c.target_states[j];
        const auto p = "targets." + std::to_string(j);
        line(p + ".state", format_list({s[0], s[1], s[2], s[3]}));
        line(p + ".waypoints", j < c.target_waypoints.size() ? format_waypoints(c.target_waypoints[j]) : "");
    }

    line("sensing.count", format_number(static_cast<int>(c.sensing_zones.size())));
    for (std::size_t k = 0; k < c.sensing_zones.size(); ++k) {
        const auto& z = c.sensing_zones[k];
        const auto p = "sensing." + std::to_string(k);
        line(p + ".id", format_number(z.id));
        line(p + ".mean", format_list({z.mean_center.x(), z.mean_center.y()}));
        line(p + ".cov", format_cov(z.center_cov));
        line(p + ".radius", format_number(z.radius));
        line(p + ".kind", to_string(z.kind));
    }

    line("comm.count", format_number(static_cast<int>(c.comm_zones.size())));
    for (std::size_t k = 0; k < c.comm_zones.size(); ++k) {
        const auto& z = c.comm_zones[k];
        const auto p = "comm." + std::to_string(k);
        line(p + ".id", format_number(z.id));
        line(p + ".mean", format_list({z.mean_center.x(), z.mean_center.y()}));
        line(p + ".cov", format_cov(z.center_cov));
        line(p + ".delta2", format_number(z.delta2));
        line(p + ".kind", to_string(z.kind));
    }
    return out;
}

/// FNV-1a of the canonical text, as 16 hex digits.
inline std::string config_hash(const ScenarioConfig& c) {
    char buf[17];
    const auto h = detail::fnv1a(serialize_config(c));
    static constexpr char hex[] = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[i] = hex[(h >> (60 - 4 * i)) & 0xf];
    buf[16] = '\0';
    return buf;
}

}  // namespace rtrack
