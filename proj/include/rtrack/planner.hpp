#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <vector>

#include "rtrack/estimation.hpp"
#include "rtrack/motion_sensing.hpp"
#include "rtrack/types.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

struct WeightSet {
    double w1 = 0.0;  // tracking
    double w2 = 0.0;  // control effort
    double w3 = 0.0;  // sensing slack
    double w4 = 0.0;  // comm slack
    double w5 = 0.0;  // safety-radius inflation, m

    bool operator==(const WeightSet&) const = default;
};

struct AdaptiveWeightConfig {
    WeightSet risky{1.0, 1e-3, 2.0, 2.0, 0.0};
    WeightSet safe{0.3, 2e-3, 20.0, 20.0, 0.5};
    int cooldown_length = 10;
};

struct RiskParams {
    double eps1 = 0.05;
    double eps2 = 0.05;
};

/// Linear interpolation from the risky set (m = 0) to the safe set (m = M).
inline WeightSet adaptive_weights(const AdaptiveWeightConfig& cfg, int total, int attacked) {
    if (total < 1 || attacked < 0 || attacked > total) throw DomainError("adaptive_weights: need 0 <= m <= M, M >= 1");
    if (attacked == 0) return cfg.risky;
    if (attacked == total) return cfg.safe;
    const double f = static_cast<double>(attacked) / total;
    auto lerp = [f](double risky, double safe) { return risky - f * (risky - safe); };
    const auto& r = cfg.risky;
    const auto& s = cfg.safe;
    return {lerp(r.w1, s.w1), lerp(r.w2, s.w2), lerp(r.w3, s.w3), lerp(r.w4, s.w4), lerp(r.w5, s.w5)};
}

/// Inverse error function: rational initial guess refined by Newton steps.
inline double erf_inv(double y) {
    if (!(std::abs(y) < 1.0)) throw DomainError("erf_inv: |y| must be < 1");
    if (y == 0.0) return 0.0;
    // Giles' single-precision approximation as the starting point.
    double w = -std::log((1.0 - y) * (1.0 + y));
    double x;
    if (w < 5.0) {
        w -= 2.5;
        double p = 2.81022636e-08;
        p = 3.43273939e-07 + p * w;
        p = -3.5233877e-06 + p * w;
        p = -4.39150654e-06 + p * w;
        p = 0.00021858087 + p * w;
        p = -0.00125372503 + p * w;
        p = -0.00417768164 + p * w;
        p = 0.246640727 + p * w;
        p = 1.50140941 + p * w;
        x = p * y;
    } else {
        w = std::sqrt(w) - 3.0;
        double p = -0.000200214257;
        p = 0.000100950558 + p * w;
        p = 0.00134934322 + p * w;
        p = -0.00367342844 + p * w;
        p = 0.00573950773 + p * w;
        p = -0.0076224613 + p * w;
        p = 0.00943887047 + p * w;
        p = 1.00167406 + p * w;
        p = 2.83297682 + p * w;
        x = p * y;
    }
    const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
    for (int k = 0; k < 3; ++k) {
        const double err = std::erf(x) - y;
        x -= err / (two_over_sqrt_pi * std::exp(-x * x));
    }
    return x;
}

namespace detail {

// Margin of a chance-tightened keep-out ball; tolerates the degenerate pose
// by picking an arbitrary outward direction.
inline double tightened_margin(const Vec2& pos, const Vec2& center, const Mat2& cov, double eps, double keep_out) {
    const Vec2 a = pos - center;
    const double n = a.norm();
    const Vec2 ahat = n > 1e-12 ? Vec2(a / n) : Vec2(1.0, 0.0);
    const double spread = std::sqrt(std::max(0.0, 2.0 * ahat.dot(cov * ahat)));
    const double tight = spread > 0.0 ? erf_inv(1.0 - 2.0 * eps) * spread : 0.0;
    return n - keep_out - tight;
}

}  // namespace detail

/// g = |a| - r_safe - erfinv(1 - 2 eps1) sqrt(2 a_hat^T Sigma a_hat), a = x - mu.
/// The chance constraint holds with zero slack iff g >= 0.
inline double sensing_margin(const Vec2& robot_pos, const ZoneRecord& zone, double eps1, double r_safe) {
    if ((robot_pos - zone.center).norm() <= 1e-9) throw DomainError("sensing_margin: robot at zone mean");
    return detail::tightened_margin(robot_pos, zone.center, zone.center_cov, eps1, r_safe);
}

/// g = |a| - delta2 c* - erfinv(1 - 2 eps2) sqrt(2 a_hat^T Sigma a_hat), with
/// c* the distance to the nearest peer.
inline double comm_margin(const Vec2& robot_pos, const Vec2& peer_pos, const ZoneRecord& zone, double eps2) {
    if ((robot_pos - zone.center).norm() <= 1e-9) throw DomainError("comm_margin: robot at zone mean");
    if ((robot_pos - peer_pos).norm() <= 0.0) throw DomainError("comm_margin: robot and peer coincide");
    return detail::tightened_margin(robot_pos, zone.center, zone.center_cov, eps2,
                                    zone.delta2 * (robot_pos - peer_pos).norm());
}

/// One-step lookahead of the target belief: the predicted prior information
/// is cached so that candidate sensor placements only add measurement
/// information. Exploits per-target block structure when present.
class Lookahead {
public:
    Lookahead(const TargetEstimate& est, const TargetModel& model, const NoiseParams& noise)
        : predicted_(ekf_predict(est, model)), noise_(noise), n_(est.targets()) {
        const Mat& p = predicted_.covariance;
        block_diagonal_ = true;
        for (int a = 0; a < n_ && block_diagonal_; ++a)
            for (int b = 0; b < n_; ++b)
                if (a != b && p.block<4, 4>(4 * a, 4 * b).cwiseAbs().maxCoeff() != 0.0) {
                    block_diagonal_ = false;
                    break;
                }
        if (block_diagonal_) {
            blocks_.resize(n_);
            for (int j = 0; j < n_; ++j) blocks_[j] = p.block<4, 4>(4 * j, 4 * j).inverse();
        } else {
            prior_info_ = detail::spd_inverse(p);
        }
    }

    const TargetEstimate& predicted() const { return predicted_; }

    double prior_trace() const { return predicted_.covariance.trace(); }

    /// Trace of the posterior covariance after every sensor in `sensors`
    /// measures every target.
    double posterior_trace(std::span<const Vec2> sensors) const {
        if (sensors.empty()) return prior_trace();
        if (block_diagonal_) {
            double total = 0.0;
            for (int j = 0; j < n_; ++j) {
                Mat4 info = blocks_[j];
                add_information(info, j, sensors);
                total += trace_of_inverse(info);
            }
            return total;
        }
        Mat info = prior_info_;
        for (int j = 0; j < n_; ++j) {
            Mat4 blk = Mat4::Zero();
            add_information(blk, j, sensors);
            info.block<4, 4>(4 * j, 4 * j) += blk;
        }
        Eigen::LLT<Mat> llt(info);
        return llt.solve(Mat::Identity(info.rows(), info.cols())).trace();
    }

private:
    void add_information(Mat4& info, int j, std::span<const Vec2> sensors) const {
        const Vec4 y = predicted_.mean.segment<4>(4 * j);
        for (const auto& s : sensors) {
            const double d = (y.head<2>() - s).norm();
            if (d <= noise_.d_min || d > noise_.max_range) continue;
            const Mat24 h = measurement_jacobian(s, y, noise_.d_min);
            const Mat2 r = noise_.covariance(d);
            const Eigen::Vector2d rinv(1.0 / r(0, 0), 1.0 / r(1, 1));
            info.noalias() += h.transpose() * rinv.asDiagonal() * h;
        }
    }

    static double trace_of_inverse(const Mat4& m) {
        Eigen::LLT<Mat4> llt(m);
        return llt.solve(Mat4::Identity()).trace();
    }

    TargetEstimate predicted_;
    NoiseParams noise_;
    int n_;
    bool block_diagonal_ = false;
    std::vector<Mat4> blocks_;
    Mat prior_info_;
};

/// Trace of the one-step-lookahead posterior covariance for the candidate
/// positions of the robots in `active_sensors`.
inline double tracking_objective(const std::map<int, Vec2>& candidate_positions, const TargetEstimate& est,
                                 const TargetModel& model, const NoiseParams& noise,
                                 const std::set<int>& active_sensors) {
    std::vector<Vec2> sensors;
    for (const auto& [id, pos] : candidate_positions)
        if (active_sensors.contains(id)) sensors.push_back(pos);
    return Lookahead(est, model, noise).posterior_trace(sensors);
}

struct SolverConfig {
    int max_iter = 60;
    double tol = 1e-6;      // step-norm convergence threshold
    double fd_step = 1e-6;  // central-difference step
};

struct ObjectiveTerms {
    double tracking = 0.0;       // f
    double effort = 0.0;         // sum |u|^2
    double slack_sensing = 0.0;  // sum nu*
    double slack_comm = 0.0;     // sum xi*
    double total = 0.0;          // weighted sum
};

struct ActiveSlack {
    int robot = 0;
    int zone = 0;
    bool comm = false;
    double value = 0.0;
};

struct PlanResult {
    std::map<int, Vec2> controls;
    ObjectiveTerms objective_terms;
    WeightSet weights;
    int iterations = 0;
    bool converged = true;
    std::vector<ActiveSlack> active_slacks;
};

/// A single-step joint planning problem over a group of robots.
struct PlanningProblem {
    std::vector<int> robots;
    std::vector<Vec2> positions;
    std::vector<bool> sensing;       // contributes measurements
    std::vector<double> peer_distance;  // c* per robot
    std::vector<Vec2> warm_start;
    std::vector<ZoneRecord> sensing_zones;
    std::vector<ZoneRecord> comm_zones;
    WeightSet weights;
    RiskParams risk;
    double dt = 0.1;
    double u_max = 2.0;
};

namespace detail {

class PlanObjective {
public:
    PlanObjective(const PlanningProblem& p, const Lookahead& look) : p_(p), look_(look) {}

    std::size_t dim() const { return 2 * p_.robots.size(); }

    ObjectiveTerms terms(const Vec& u, std::vector<ActiveSlack>* slacks = nullptr) const {
        ObjectiveTerms t;
        const auto& w = p_.weights;
        sensors_.clear();
        for (std::size_t i = 0; i < p_.robots.size(); ++i) {
            const Vec2 ui = u.segment<2>(2 * static_cast<Eigen::Index>(i));
            const Vec2 next = p_.positions[i] + p_.dt * ui;
            t.effort += ui.squaredNorm();
            if (p_.sensing[i]) sensors_.push_back(next);
            for (const auto& z : p_.sensing_zones) {
                const double nu = std::max(0.0, -tightened_margin(next, z.center, z.center_cov, p_.risk.eps1, z.radius + w.w5));
                t.slack_sensing += nu;
                if (slacks && nu > 0.0) slacks->push_back({p_.robots[i], z.zone_id, false, nu});
            }
            for (const auto& z : p_.comm_zones) {
                const double g = z.provenance == Provenance::CircleFit
                                     ? tightened_margin(next, z.center, Mat2::Zero(), p_.risk.eps2, z.radius + w.w5)
                                     : tightened_margin(next, z.center, z.center_cov, p_.risk.eps2,
                                                        z.delta2 * p_.peer_distance[i]);
                const double xi = std::max(0.0, -g);
                t.slack_comm += xi;
                if (slacks && xi > 0.0) slacks->push_back({p_.robots[i], z.zone_id, true, xi});
            }
        }
        t.tracking = w.w1 != 0.0 || slacks ? look_.posterior_trace(sensors_) : 0.0;
        t.total = w.w1 * t.tracking + w.w2 * t.effort + w.w3 * t.slack_sensing + w.w4 * t.slack_comm;
        return t;
    }

    double operator()(const Vec& u) const { return terms(u).total; }

    Vec gradient(const Vec& u, double h) const {
        Vec g(u.size());
        Vec x = u;
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            x[k] = u[k] + h;
            const double fp = (*this)(x);
            x[k] = u[k] - h;
            const double fm = (*this)(x);
            x[k] = u[k];
            g[k] = (fp - fm) / (2.0 * h);
        }
        return g;
    }

    Vec project(Vec u) const {
        for (Eigen::Index i = 0; i + 1 < u.size(); i += 2) u.segment<2>(i) = clamp_norm(u.segment<2>(i), p_.u_max);
        return u;
    }

private:
    const PlanningProblem& p_;
    const Lookahead& look_;
    mutable std::vector<Vec2> sensors_;
};

}  // namespace detail

/// Projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking on the per-robot control balls |u_i| <= u_max. Gradients are
/// central differences. Step lengths are expressed in control space, so a
/// common positive scaling of the weights does not change the iterates.
inline PlanResult solve_plan(const PlanningProblem& problem, const Lookahead& look, const SolverConfig& cfg) {
    PlanResult out;
    out.weights = problem.weights;
    const detail::PlanObjective obj(problem, look);
    const auto n = static_cast<Eigen::Index>(obj.dim());
    if (n == 0) return out;

    Vec u = Vec::Zero(n);
    for (std::size_t i = 0; i < problem.robots.size() && i < problem.warm_start.size(); ++i)
        u.segment<2>(2 * static_cast<Eigen::Index>(i)) = problem.warm_start[i];
    u = obj.project(u);

    double f = obj(u);
    Vec g = obj.gradient(u, cfg.fd_step);
    const double gnorm = g.norm();
    double alpha = gnorm > 0.0 ? 0.1 * problem.u_max / gnorm : 1.0;
    out.converged = false;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        if (g.norm() == 0.0) {
            out.converged = true;
            break;
        }
        Vec u_new;
        double f_new = f;
        bool accepted = false;
        double step_norm = 0.0;
        for (int ls = 0; ls < 40; ++ls) {
            u_new = obj.project(u - alpha * g);
            const Vec d = u_new - u;
            step_norm = d.norm();
            if (step_norm < cfg.tol) break;
            f_new = obj(u_new);
            if (f_new <= f + 1e-4 * g.dot(d)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            out.converged = step_norm < cfg.tol;
            break;
        }
        const Vec s = u_new - u;
        const Vec g_new = obj.gradient(u_new, cfg.fd_step);
        const Vec y = g_new - g;
        const double sy = s.dot(y);
        u = std::move(u_new);
        f = f_new;
        g = g_new;
        if (s.norm() < cfg.tol) {
            out.converged = true;
            ++it;
            break;
        }
        const double gn = g.norm();
        alpha = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
        // Keep a single trial step within a few control-ball diameters.
        if (gn > 0.0) alpha = std::min(alpha, 4.0 * problem.u_max / gn);
    }
    out.iterations = it;
    for (std::size_t i = 0; i < problem.robots.size(); ++i)
        out.controls[problem.robots[i]] = u.segment<2>(2 * static_cast<Eigen::Index>(i));
    out.objective_terms = obj.terms(u, &out.active_slacks);
    return out;
}

/// Models and settings the planners share.
struct PlannerContext {
    TargetModel estimation_model;
    NoiseParams noise;
    RobotModel robot;
    SolverConfig solver;
    std::map<int, Vec2> warm_start;
};

/// The estimate a robot plans with: its solo filter if it has one, else the
/// league estimate.
inline const TargetEstimate& estimate_for(const WorldState& w, int robot) {
    auto it = w.estimate_solo.find(robot);
    return it != w.estimate_solo.end() ? it->second : w.estimate_league;
}

namespace detail {

inline double nearest_distance(const WorldState& w, int robot, std::span<const int> candidates) {
    double best = std::numeric_limits<double>::infinity();
    for (int j : candidates)
        if (j != robot) best = std::min(best, (w.robots[j].position - w.robots[robot].position).norm());
    if (!std::isfinite(best)) {
        for (const auto& r : w.robots)
            if (r.id != robot) best = std::min(best, (r.position - w.robots[robot].position).norm());
    }
    return std::isfinite(best) ? best : 0.0;
}

inline PlanningProblem make_problem(std::span<const int> group, const WorldState& w, const WeightSet& weights,
                                    const RiskParams& risk, const PlannerContext& ctx, bool use_zones) {
    PlanningProblem p;
    p.weights = weights;
    p.risk = risk;
    p.dt = ctx.robot.dt;
    p.u_max = ctx.robot.u_max;
    ZoneKnowledge known;
    for (int id : group) {
        const auto& r = w.robots.at(id);
        p.robots.push_back(id);
        p.positions.push_back(r.position);
        p.sensing.push_back(r.status.sensing == Capability::Ok);
        p.peer_distance.push_back(nearest_distance(w, id, group));
        auto ws = ctx.warm_start.find(id);
        p.warm_start.push_back(ws != ctx.warm_start.end() ? ws->second : Vec2::Zero());
        if (use_zones && id < static_cast<int>(w.knowledge.robots.size())) {
            merge_into(known.sensing, w.knowledge.robots[id].sensing);
            merge_into(known.comm, w.knowledge.robots[id].comm);
        }
    }
    for (const auto& [id, rec] : known.sensing) p.sensing_zones.push_back(rec);
    for (const auto& [id, rec] : known.comm) p.comm_zones.push_back(rec);
    return p;
}

}  // namespace detail

/// Joint plan for one league over its shared zone knowledge.
inline PlanResult plan_centralized(std::span<const int> league, const WorldState& w, const WeightSet& weights,
                                   const RiskParams& risk, const PlannerContext& ctx) {
    if (league.empty()) throw DomainError("plan_centralized: empty league");
    const PlanningProblem p = detail::make_problem(league, w, weights, risk, ctx, true);
    const Lookahead look(estimate_for(w, league.front()), ctx.estimation_model, ctx.noise);
    return solve_plan(p, look, ctx.solver);
}

/// Conservative plan for an isolated robot: its own estimate, its own
/// knowledge, and the safe weights.
inline PlanResult plan_individual(int robot, const WorldState& w, const WeightSet& safe_weights,
                                  const RiskParams& risk, const PlannerContext& ctx) {
    const int group[] = {robot};
    const PlanningProblem p = detail::make_problem(group, w, safe_weights, risk, ctx, true);
    const Lookahead look(estimate_for(w, robot), ctx.estimation_model, ctx.noise);
    return solve_plan(p, look, ctx.solver);
}

/// Zone-unaware baseline for one connected group (w3 = w4 = 0, no zones).
inline PlanResult plan_vanilla_group(std::span<const int> group, const WorldState& w, WeightSet weights,
                                     const PlannerContext& ctx) {
    weights.w3 = weights.w4 = weights.w5 = 0.0;
    const PlanningProblem p = detail::make_problem(group, w, weights, {}, ctx, false);
    const Lookahead look(estimate_for(w, group.front()), ctx.estimation_model, ctx.noise);
    return solve_plan(p, look, ctx.solver);
}

/// Baseline over the whole team: each connected component plans jointly,
/// isolated robots plan alone on their own estimates.
inline PlanResult plan_vanilla(std::span<const std::vector<int>> components, const WorldState& w,
                               const WeightSet& weights, const PlannerContext& ctx) {
    PlanResult all;
    all.weights = weights;
    all.weights.w3 = all.weights.w4 = all.weights.w5 = 0.0;
    for (const auto& group : components) {
        PlanResult r = plan_vanilla_group(group, w, weights, ctx);
        all.controls.insert(r.controls.begin(), r.controls.end());
        all.iterations = std::max(all.iterations, r.iterations);
        all.converged = all.converged && r.converged;
        all.objective_terms.tracking += r.objective_terms.tracking;
        all.objective_terms.effort += r.objective_terms.effort;
        all.objective_terms.total += r.objective_terms.total;
    }
    return all;
}

}  // namespace rtrack
