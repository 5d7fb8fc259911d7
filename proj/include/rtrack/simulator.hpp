#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rtrack/circle_mode.hpp"
#include "rtrack/coordination.hpp"
#include "rtrack/estimation.hpp"
#include "rtrack/hazards.hpp"
#include "rtrack/motion_sensing.hpp"
#include "rtrack/planner.hpp"
#include "rtrack/rng.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

enum class PlannerMode { Adaptive, Vanilla };

inline const char* to_string(PlannerMode m) { return m == PlannerMode::Adaptive ? "adaptive" : "vanilla"; }

struct ScenarioConfig {
    std::string name = "custom";
    std::vector<Vec2> robot_positions;
    std::vector<Vec4> target_states;
    std::vector<std::vector<Vec2>> target_waypoints;
    std::vector<SensingZone> sensing_zones;
    std::vector<CommZone> comm_zones;
    double dt = 0.1;
    int steps = 300;
    std::uint64_t seed = 1;
    PlannerMode mode = PlannerMode::Adaptive;
    RiskParams risk;
    AdaptiveWeightConfig weights;
    HazardConfig hazard;
    NoiseParams noise{0.05, 0.05, 0.1};
    double u_max = 2.0;
    double target_v_max = 0.3;
    double target_kp = 0.5;
    double target_q_pos = 0.0;  // truth process noise
    double target_q_vel = 1e-4;
    double filter_q_pos = 1e-4;  // filter process noise
    double filter_q_vel = 1e-2;
    double init_pos_sigma = 0.1;
    double init_cov = 0.5;
    double sigma_peer = 0.02;
    int observation_window = 30;
    CircleAcceptance circle_accept;
    CircularModeConfig circular;
    SolverConfig solver;
    // A robot parked on top of a target makes the bearing linearization
    // useless; gating at the 99.9% chi-square(2) point drops those rows.
    EkfConfig ekf{true, true, 13.8};

    int robot_count() const { return static_cast<int>(robot_positions.size()); }
    int target_count() const { return static_cast<int>(target_states.size()); }
};

struct ScenarioIssue {
    std::string key;
    std::string message;
};

inline std::vector<ScenarioIssue> validate_scenario(const ScenarioConfig& c) {
    std::vector<ScenarioIssue> out;
    auto need = [&](bool ok, const char* key, const char* msg) {
        if (!ok) out.push_back({key, msg});
    };
    need(c.steps >= 1, "scenario.steps", "must be >= 1");
    need(c.dt > 0.0, "scenario.dt", "must be > 0");
    need(c.robot_count() >= 1, "robots", "at least one robot is required");
    need(c.target_count() >= 1, "targets", "at least one target is required");
    need(c.target_waypoints.size() <= c.target_states.size(), "targets", "more waypoint lists than targets");
    need(c.risk.eps1 > 0.0 && c.risk.eps1 < 0.5, "risk.eps1", "must lie in (0, 0.5)");
    need(c.risk.eps2 > 0.0 && c.risk.eps2 < 0.5, "risk.eps2", "must lie in (0, 0.5)");
    need(c.hazard.delta1 >= 0.0 && c.hazard.delta1 <= 1.0, "hazard.delta1", "must lie in [0, 1]");
    need(c.hazard.mc_samples >= 1, "hazard.mc_samples", "must be >= 1");
    need(c.hazard.activation_period_steps >= 1, "hazard.activation_period_steps", "must be >= 1");
    need(c.weights.cooldown_length >= 0, "weights.cooldown_length", "must be >= 0");
    need(c.u_max > 0.0, "robot.u_max", "must be > 0");
    need(c.target_v_max > 0.0, "target.v_max", "must be > 0");
    need(c.noise.sigma_range > 0.0, "noise.sigma_range", "must be > 0");
    need(c.noise.sigma_bearing > 0.0, "noise.sigma_bearing", "must be > 0");
    need(c.noise.gamma >= 0.0, "noise.gamma", "must be >= 0");
    need(c.target_q_pos >= 0.0, "target.q_pos", "must be >= 0");
    need(c.target_q_vel >= 0.0, "target.q_vel", "must be >= 0");
    need(c.filter_q_pos >= 0.0, "filter.q_pos", "must be >= 0");
    need(c.filter_q_vel >= 0.0, "filter.q_vel", "must be >= 0");
    need(c.init_pos_sigma >= 0.0, "estimate.init_pos_sigma", "must be >= 0");
    need(c.init_cov > 0.0, "estimate.init_cov", "must be > 0");
    need(c.sigma_peer >= 0.0, "coordination.sigma_peer", "must be >= 0");
    need(c.observation_window >= 6, "coordination.window", "must be >= 6");
    need(!c.ekf.innovation_gate || *c.ekf.innovation_gate > 0.0, "ekf.innovation_gate", "must be > 0");
    for (const auto& z : c.sensing_zones) need(z.radius > 0.0, "zones.sensing", "radius must be > 0");
    for (const auto& z : c.comm_zones) need(z.delta2 > 0.0, "zones.comm", "delta2 must be > 0");
    return out;
}

/// A runtime failure inside the step loop, tagged with the step index.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, int step)
        : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

struct RobotRecord {
    int id = 0;
    Vec2 position = Vec2::Zero();
    Vec2 control = Vec2::Zero();
    Mode mode = Mode::Centralized;
    FailureStatus status;
    int league = -1;
};

struct TargetRecord {
    int id = 0;
    Vec4 truth = Vec4::Zero();
    Vec4 estimate = Vec4::Zero();
};

struct InferenceEvent {
    int observer = 0;
    int observed = 0;
    int zone = 0;
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
    bool first = false;  // first time this zone id was inferred
};

struct RejoinEvent {
    int robot = 0;
    double lambda = 0.0;
};

inline constexpr int kPhaseCount = 10;

struct StepRecord {
    int t = 0;
    std::vector<RobotRecord> robots;
    std::vector<TargetRecord> targets;
    double mse = 0.0;
    double trace = 0.0;
    double effort = 0.0;  // Euclidean norm of the stacked team control
    std::vector<AttackEvent> events;
    std::vector<InferenceEvent> inferences;
    std::vector<RejoinEvent> rejoins;
    WeightSet weights;
    bool cooldown = false;
    std::array<int, kPhaseCount> phase_stamps{};
};

/// Mean over targets of the squared position error.
inline double mse(std::span<const TargetState> truth, const TargetEstimate& est) {
    if (est.targets() != static_cast<int>(truth.size())) throw DomainError("mse: dimension mismatch");
    if (truth.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j)
        s += (est.position(static_cast<int>(j)) - truth[j].position()).squaredNorm();
    return s / static_cast<double>(truth.size());
}

inline double trace_metric(const TargetEstimate& est) {
    if (est.covariance.rows() != est.covariance.cols()) throw DomainError("trace_metric: covariance not square");
    return est.covariance.trace();
}

/// The stepwise engine behind run(). Each call to step() executes the full
/// per-step pipeline once.
class Simulator {
public:
    explicit Simulator(const ScenarioConfig& cfg)
        : cfg_(cfg),
          process_(RngStream::derive(cfg.seed, "process-noise")),
          measurement_(RngStream::derive(cfg.seed, "measurement-noise")),
          hazards_(RngStream::derive(cfg.seed, "hazards")),
          peer_(RngStream::derive(cfg.seed, "peer")),
          buffers_(static_cast<std::size_t>(cfg.observation_window)) {
        const auto issues = validate_scenario(cfg);
        if (!issues.empty()) throw ConfigError(issues.front().key + ": " + issues.front().message, 0, issues.front().key);

        truth_ = make_cv_model(cfg.dt, cfg.target_q_pos, cfg.target_q_vel);
        truth_.v_max = cfg.target_v_max;
        truth_.kp = cfg.target_kp;
        truth_.waypoints = cfg.target_waypoints;
        ctx_.estimation_model = make_cv_model(cfg.dt, cfg.filter_q_pos, cfg.filter_q_vel);
        ctx_.noise = cfg.noise;
        ctx_.robot = {cfg.dt, cfg.u_max};
        ctx_.solver = cfg.solver;

        const int m = cfg.robot_count(), n = cfg.target_count();
        for (int i = 0; i < m; ++i) world_.robots.push_back({i, cfg.robot_positions[i], {}, 0, -1, -1});
        for (int j = 0; j < n; ++j) world_.targets.push_back({j, cfg.target_states[j], 0});
        world_.sensing_zones = cfg.sensing_zones;
        world_.comm_zones = cfg.comm_zones;
        world_.knowledge.robots.resize(m);
        world_.comm_center_samples.assign(cfg.comm_zones.size(), Vec2::Zero());
        for (std::size_t k = 0; k < cfg.comm_zones.size(); ++k) world_.comm_center_samples[k] = cfg.comm_zones[k].mean_center;

        RngStream init = RngStream::derive(cfg.seed, "init");
        world_.estimate_league.mean = Vec::Zero(4 * n);
        for (int j = 0; j < n; ++j) {
            world_.estimate_league.mean.segment<4>(4 * j) = cfg.target_states[j];
            const double ex = init.normal(), ey = init.normal();
            world_.estimate_league.mean.segment<2>(4 * j) += cfg.init_pos_sigma * Vec2(ex, ey);
        }
        world_.estimate_league.covariance = cfg.init_cov * Mat::Identity(4 * n, 4 * n);
    }

    const WorldState& world() const { return world_; }
    const ScenarioConfig& config() const { return cfg_; }
    bool done() const { return world_.t >= cfg_.steps; }

    StepRecord step() {
        try {
            return step_impl();
        } catch (const SimulationError&) {
            throw;
        } catch (const Error& e) {
            throw SimulationError(e.what(), world_.t);
        }
    }

private:
    bool adaptive() const { return cfg_.mode == PlannerMode::Adaptive; }

    void reveal_to(int robot, AttackKind kind, int zone) {
        auto& k = world_.knowledge.robots[robot];
        if (kind == AttackKind::Sensing) {
            for (const auto& z : world_.sensing_zones)
                if (z.id == zone) detail::merge_into(k.sensing, ZoneMap{{z.id, reveal(z)}});
        } else {
            for (const auto& z : world_.comm_zones)
                if (z.id == zone) detail::merge_into(k.comm, ZoneMap{{z.id, reveal(z)}});
        }
    }

    int comm_zone_index(int id) const {
        for (std::size_t k = 0; k < world_.comm_zones.size(); ++k)
            if (world_.comm_zones[k].id == id) return static_cast<int>(k);
        return -1;
    }

    // Largest component of size >= 2; ties go to the one with the smallest id.
    static int main_league(const std::vector<std::vector<int>>& comps) {
        int best = -1;
        for (std::size_t c = 0; c < comps.size(); ++c)
            if (comps[c].size() >= 2 && (best < 0 || comps[c].size() > comps[best].size())) best = static_cast<int>(c);
        return best;
    }

    void reconcile_estimates(const std::vector<std::vector<int>>& comps, int main, StepRecord& rec) {
        auto& solo = world_.estimate_solo;
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (static_cast<int>(c) == main) continue;
            for (int id : comps[c])
                if (!solo.contains(id)) solo.emplace(id, world_.estimate_league);
        }
        if (main >= 0) {
            const auto& members = comps[main];
            std::vector<int> rejoining;
            for (int id : members)
                if (solo.contains(id)) rejoining.push_back(id);
            TargetEstimate base = world_.estimate_league;
            if (!league_live_ || rejoining.size() == members.size()) {
                base = solo.at(rejoining.front());
                solo.erase(rejoining.front());
                rejoining.erase(rejoining.begin());
            }
            for (int id : rejoining) {
                const CiResult r = on_reconnect(base, solo.at(id));
                base = r.fused;
                rec.rejoins.push_back({id, r.lambda});
                solo.erase(id);
            }
            world_.estimate_league = std::move(base);
            league_live_ = true;
        } else {
            league_live_ = false;
        }
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (static_cast<int>(c) == main || comps[c].size() < 2) continue;
            TargetEstimate shared = solo.at(comps[c].front());
            for (std::size_t k = 1; k < comps[c].size(); ++k) shared = ci_fuse(shared, solo.at(comps[c][k])).fused;
            for (int id : comps[c]) solo[id] = shared;
        }
    }

    void infer_zones(const std::vector<std::vector<int>>& comps, StepRecord& rec) {
        std::vector<int> comp_of(world_.robots.size());
        for (std::size_t c = 0; c < comps.size(); ++c)
            for (int id : comps[c]) comp_of[id] = static_cast<int>(c);
        for (const auto& a : comps)
            for (int i : a)
                for (int j : a)
                    if (i != j) buffers_.drop(i, j);
        for (const auto& o : observe_peers(world_, comps, cfg_.sigma_peer, peer_)) buffers_.add(o);
        for (const auto& inf : infer_zone_from_circle(buffers_, world_.knowledge, cfg_.circle_accept)) {
            detail::merge_into(world_.knowledge.robots[inf.observer].comm, ZoneMap{{inf.record.zone_id, inf.record}});
            const bool first = inferred_.insert(inf.record.zone_id).second;
            rec.inferences.push_back(
                {inf.observer, inf.observed, inf.record.zone_id, inf.record.center, inf.record.radius, first});
        }
    }

    // Jam flag of a circling robot: within the jam distance of the current
    // center realization of the zone that disabled it.
    bool circling_jammed(const RobotState& r, const CircularEvader& ev) const {
        const int k = comm_zone_index(r.comm_trigger);
        if (k < 0) return false;
        return (r.position - world_.comm_center_samples[k]).norm() <= ev.jam_distance();
    }

    void start_circling(const RobotState& r) {
        const int k = comm_zone_index(r.comm_trigger);
        const double delta2 = k >= 0 ? world_.comm_zones[k].delta2 : 0.0;
        double c_star = 0.0;
        const int j = nearest_peer(world_.robots, r.id);
        if (j >= 0) c_star = (world_.robots[j].position - r.position).norm();
        // The jammer most likely lies ahead of where the robot was heading.
        const double jd = delta2 * c_star;
        Vec2 origin = r.position;
        if (auto it = last_controls_.find(r.id); it != last_controls_.end() && it->second.norm() > 1e-9)
            origin += 0.5 * jd * it->second.normalized();
        evaders_.emplace(r.id, CircularEvader(r.position, origin, jd, cfg_.circular, cfg_.dt, cfg_.u_max));
    }

    StepRecord step_impl() {
        if (done()) throw DomainError("simulation already finished");
        StepRecord rec;
        rec.t = world_.t;
        int stamp = 0;
        auto mark = [&](int phase) { rec.phase_stamps[phase] = ++stamp; };

        // 1. hazard activation
        if (world_.t % cfg_.hazard.activation_period_steps == 0) {
            TickResult tick = activation_tick(world_, cfg_.hazard, hazards_);
            world_.robots = std::move(tick.robots);
            world_.comm_center_samples = std::move(tick.comm_center_samples);
            for (const auto& r : tick.reveals) reveal_to(r.robot, r.kind, r.zone);
            rec.events = std::move(tick.events);
        }
        mark(0);

        // 2. cool-down
        if (adaptive()) {
            bool attacked = false;
            for (const auto& e : rec.events) attacked = attacked || e.transition == Transition::Attacked;
            cooldown_ = attacked ? cfg_.weights.cooldown_length : std::max(0, cooldown_ - 1);
            for (auto& r : world_.robots) r.cooldown_remaining = cooldown_;
        }
        mark(1);

        // 3. comm graph, leagues, dispatch
        const auto comps = league_members(world_, build_comm_graph(world_));
        const auto directives = dispatch(world_, comps, {!adaptive()});
        for (const auto& d : directives)
            if (d.mode == Mode::Circular && !evaders_.contains(d.robot)) start_circling(world_.robots[d.robot]);
        mark(2);

        // 4. knowledge, circle inference, reconnect fusion
        const int main = main_league(comps);
        if (adaptive()) infer_zones(comps, rec);
        for (const auto& c : comps)
            if (c.size() >= 2) world_.knowledge = merge_knowledge(std::move(world_.knowledge), c);
        reconcile_estimates(comps, main, rec);
        mark(3);

        // 5. weights
        const int m_total = world_.robot_count();
        if (!adaptive())
            rec.weights = cfg_.weights.risky;
        else if (cooldown_ > 0)
            rec.weights = cfg_.weights.safe;
        else
            rec.weights = adaptive_weights(cfg_.weights, m_total, count_attacked(world_));
        rec.cooldown = cooldown_ > 0;
        mark(4);

        // 6. planning
        std::map<int, Vec2> controls;
        ctx_.warm_start = last_controls_;
        for (const auto& comp : comps) {
            PlanResult plan;
            if (comp.size() >= 2) {
                plan = adaptive() ? plan_centralized(comp, world_, rec.weights, cfg_.risk, ctx_)
                                  : plan_vanilla_group(comp, world_, rec.weights, ctx_);
                controls.insert(plan.controls.begin(), plan.controls.end());
                continue;
            }
            const int id = comp.front();
            switch (directives[id].mode) {
            case Mode::Individual:
                plan = adaptive() ? plan_individual(id, world_, cfg_.weights.safe, cfg_.risk, ctx_)
                                  : plan_vanilla_group(comp, world_, rec.weights, ctx_);
                controls[id] = plan.controls.at(id);
                break;
            case Mode::Circular: {
                auto& ev = evaders_.at(id);
                ev.record(world_.robots[id].position, circling_jammed(world_.robots[id], ev));
                controls[id] = ev.control(world_.robots[id].position);
                break;
            }
            case Mode::Idle:
            case Mode::Centralized:
                controls[id] = Vec2::Zero();
                break;
            }
        }
        mark(5);

        // 7. robot motion
        double effort2 = 0.0;
        for (auto& r : world_.robots) {
            const Vec2 u = clamp_norm(controls[r.id], cfg_.u_max);
            r.position = step_robot(r.position, u, ctx_.robot);
            controls[r.id] = u;
            effort2 += u.squaredNorm();
        }
        last_controls_ = controls;
        mark(6);

        // 8. target motion
        world_.targets = step_targets(std::move(world_.targets), truth_, process_);
        mark(7);

        // 9. measurements and filtering
        std::vector<Measurement> all;
        for (const auto& r : world_.robots)
            for (const auto& t : world_.targets)
                if (auto z = measure(r, t, measurement_, cfg_.noise)) all.push_back(*z);
        auto filter = [&](const TargetEstimate& est, const std::vector<int>& members) {
            TargetEstimate pred = ekf_predict(est, ctx_.estimation_model);
            std::vector<Measurement> mine;
            for (const auto& z : all)
                if (std::find(members.begin(), members.end(), z.robot) != members.end()) mine.push_back(z);
            return ekf_update(pred, stack_measurements(mine, pred, cfg_.noise.d_min), cfg_.ekf);
        };
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (static_cast<int>(c) == main) {
                world_.estimate_league = filter(world_.estimate_league, comps[c]);
            } else {
                const TargetEstimate next = filter(world_.estimate_solo.at(comps[c].front()), comps[c]);
                for (int id : comps[c]) world_.estimate_solo[id] = next;
            }
        }
        mark(8);

        // 10. metrics
        const TargetEstimate* reported = &world_.estimate_league;
        if (main < 0) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [id, est] : world_.estimate_solo)
                if (const double tr = trace_metric(est); tr < best) {
                    best = tr;
                    reported = &est;
                }
        }
        rec.mse = mse(world_.targets, *reported);
        rec.trace = trace_metric(*reported);
        rec.effort = std::sqrt(effort2);
        std::vector<int> league_of(world_.robots.size(), -1);
        for (std::size_t c = 0; c < comps.size(); ++c)
            if (comps[c].size() >= 2)
                for (int id : comps[c]) league_of[id] = static_cast<int>(c);
        for (const auto& r : world_.robots)
            rec.robots.push_back({r.id, r.position, controls[r.id], directives[r.id].mode, r.status, league_of[r.id]});
        for (const auto& t : world_.targets)
            rec.targets.push_back({t.id, t.state, reported->mean.segment<4>(4 * t.id)});
        mark(9);

        ++world_.t;
        return rec;
    }

    ScenarioConfig cfg_;
    TargetModel truth_;
    PlannerContext ctx_;
    RngStream process_, measurement_, hazards_, peer_;
    WorldState world_;
    ObservationBuffers buffers_;
    std::map<int, CircularEvader> evaders_;
    std::set<int> inferred_;
    std::map<int, Vec2> last_controls_;
    int cooldown_ = 0;
    bool league_live_ = true;
};

inline std::vector<StepRecord> run(const ScenarioConfig& cfg) {
    Simulator sim(cfg);
    std::vector<StepRecord> out;
    out.reserve(static_cast<std::size_t>(cfg.steps));
    while (!sim.done()) out.push_back(sim.step());
    return out;
}

/// First step at which no robot can sense, if any.
inline std::optional<int> first_all_sensing_lost(std::span<const StepRecord> records) {
    for (const auto& r : records) {
        bool all = !r.robots.empty();
        for (const auto& rb : r.robots) all = all && rb.status.sensing != Capability::Ok;
        if (all) return r.t;
    }
    return std::nullopt;
}

/// Steps survived before the whole team lost sensing (the run length if never).
inline int steps_until_all_sensing_lost(std::span<const StepRecord> records) {
    return first_all_sensing_lost(records).value_or(static_cast<int>(records.size()));
}

/// Mean trace over steps [from, to).
inline double mean_trace(std::span<const StepRecord> records, int from, int to) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : records)
        if (r.t >= from && r.t < to) {
            s += r.trace;
            ++n;
        }
    if (n == 0) throw DomainError("mean_trace: empty step range");
    return s / n;
}

}  // namespace rtrack
