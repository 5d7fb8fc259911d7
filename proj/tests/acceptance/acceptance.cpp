// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <unistd.h>

#include "rtrack/io.hpp"

using namespace rtrack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Mat random_spd(RngStream& rng, int n) {
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    return a * a.transpose() / n + 0.1 * Mat::Identity(n, n);
}

// Wilson-Hilferty approximation of the chi-square quantile.
double chi2_quantile(double p, double dof) {
    const double z = std::sqrt(2.0) * erf_inv(2.0 * p - 1.0);
    const double h = 2.0 / (9.0 * dof);
    return dof * std::pow(1.0 - h + z * std::sqrt(h), 3);
}

Outcome weights_endpoints() {
    const AdaptiveWeightConfig cfg;
    bool ok = true;
    for (int m_total = 1; m_total <= 6; ++m_total) {
        ok = ok && adaptive_weights(cfg, m_total, 0) == cfg.risky;
        ok = ok && adaptive_weights(cfg, m_total, m_total) == cfg.safe;
    }
    // M = 3, m = 1: each weight moves a third of the way from risky to safe.
    const WeightSet w = adaptive_weights(cfg, 3, 1);
    const double want[5] = {0.766666666666666667, 0.001333333333333333, 8.0, 8.0, 0.166666666666666667};
    const double got[5] = {w.w1, w.w2, w.w3, w.w4, w.w5};
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
    // M = 4, m = 3.
    const WeightSet v = adaptive_weights(cfg, 4, 3);
    const double want2[5] = {0.475, 0.00175, 15.5, 15.5, 0.375};
    const double got2[5] = {v.w1, v.w2, v.w3, v.w4, v.w5};
    for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(got2[k] - want2[k]));
    return {ok && worst < 1e-12, fmt("endpoints exact=%s, interior max err %.1e", ok ? "yes" : "no", worst)};
}

Outcome ekf_oracle() {
    const auto model = make_cv_model(0.1, 1e-3, 1e-2);
    Eigen::Matrix<double, 2, 4> h;
    h << 1, 0, 0, 0, 0, 1, 0, 0;
    const Eigen::Matrix2d r = 0.04 * Eigen::Matrix2d::Identity();
    const Eigen::Matrix4d a = model.A, q = model.Q;

    // Brute-force filter with plain fixed-size matrices.
    RngStream rng(2024);
    Eigen::Vector4d x = Eigen::Vector4d::Zero(), truth(0, 0, 0.5, 0.2);
    Eigen::Matrix4d p = Eigen::Matrix4d::Identity();
    TargetEstimate est{Vec::Zero(4), Mat::Identity(4, 4)};
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        truth = a * truth;
        const Eigen::Vector2d z = h * truth + Eigen::Vector2d(0.2 * rng.normal(), 0.2 * rng.normal());
        x = a * x;
        p = a * p * a.transpose() + q;
        const Eigen::Matrix2d s = h * p * h.transpose() + r;
        const Eigen::Matrix<double, 4, 2> gain = p * h.transpose() * s.inverse();
        x += gain * (z - h * x);
        p = (Eigen::Matrix4d::Identity() - gain * h) * p;
        p = (0.5 * (p + p.transpose())).eval();
        est = ekf_update(ekf_predict(est, model), z, h, r);
        worst = std::max({worst, (est.mean - x).cwiseAbs().maxCoeff(), (est.covariance - p).cwiseAbs().maxCoeff()});
    }

    // NEES at the final step over Monte Carlo runs of the true model.
    const int runs = 200, steps = 50;
    const Eigen::Matrix4d q_sqrt = q.llt().matrixL();
    double nees_sum = 0.0;
    for (int run = 0; run < runs; ++run) {
        RngStream g = RngStream::derive(run, "nees");
        TargetEstimate e{Vec::Zero(4), Mat::Identity(4, 4)};
        Eigen::Vector4d y;
        y << g.normal(), g.normal(), g.normal(), g.normal();
        for (int k = 0; k < steps; ++k) {
            Eigen::Vector4d w;
            w << g.normal(), g.normal(), g.normal(), g.normal();
            y = a * y + q_sqrt * w;
            const Eigen::Vector2d z = h * y + Eigen::Vector2d(0.2 * g.normal(), 0.2 * g.normal());
            e = ekf_update(ekf_predict(e, model), z, h, r);
        }
        const Vec err = y - e.mean;
        nees_sum += err.dot(e.covariance.ldlt().solve(err));
    }
    const double lo = chi2_quantile(0.005, 4.0 * runs) / runs, hi = chi2_quantile(0.995, 4.0 * runs) / runs;
    const double nees = nees_sum / runs;
    return {worst < 1e-10 && nees >= lo && nees <= hi,
            fmt("max diff %.1e over 50 steps; mean NEES %.3f in [%.3f, %.3f]", worst, nees, lo, hi)};
}

Outcome ci_properties() {
    RngStream rng(3);
    int trace_ok = 0, grid_ok = 0;
    for (int k = 0; k < 100; ++k) {
        const int n = 4;
        TargetEstimate a{Vec::Zero(n), random_spd(rng, n)}, b{Vec::Zero(n), random_spd(rng, n)};
        for (int i = 0; i < n; ++i) {
            a.mean[i] = rng.normal();
            b.mean[i] = rng.normal();
        }
        const auto r = ci_fuse(a, b);
        const double tr = r.fused.covariance.trace();
        trace_ok += tr <= std::max(a.covariance.trace(), b.covariance.trace()) + 1e-12;
        const Mat ia = a.covariance.inverse(), ib = b.covariance.inverse();
        double grid = INFINITY;
        for (int g = 0; g <= 100; ++g) grid = std::min(grid, (g / 100.0 * ia + (1 - g / 100.0) * ib).inverse().trace());
        grid_ok += tr <= grid + 1e-6;
    }
    TargetEstimate same{Vec::Zero(4), random_spd(rng, 4)};
    same.mean << 1, 2, 3, 4;
    const bool identity = ci_fuse(same, same).fused == same;
    return {trace_ok == 100 && grid_ok == 100 && identity,
            fmt("trace bound %d/100, grid %d/100, identity %s", trace_ok, grid_ok, identity ? "exact" : "inexact")};
}

Outcome chance_constraint() {
    // The sensing-temp zone: isotropic variance 0.3, radius 1.5.
    const auto zone = reveal(preset("sensing-temp").sensing_zones[0]);
    const double r = zone.radius;
    const Eigen::LLT<Mat2> chol(zone.center_cov);
    const Mat2 l = chol.matrixL();
    const Vec2 dir = Vec2(1.0, 0.6).normalized();
    bool ok = true;
    std::string detail;
    for (double eps : {0.05, 0.02, 0.01}) {
        double lo = 1e-3, hi = 20.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (sensing_margin(zone.center + mid * dir, zone, eps, r) < 0 ? lo : hi) = mid;
        }
        const Vec2 pos = zone.center + 0.5 * (lo + hi) * dir;
        RngStream rng = RngStream::derive(7, "calibration");
        const int n = 100000;
        int inside = 0;
        for (int k = 0; k < n; ++k) {
            const double a = rng.normal(), b = rng.normal();
            inside += (pos - (zone.center + l * Vec2(a, b))).norm() <= r;
        }
        const double p = static_cast<double>(inside) / n;
        ok = ok && std::abs(p - eps) <= 0.02;
        detail += fmt("%seps %.2f -> %.4f", detail.empty() ? "" : ", ", eps, p);
    }
    return {ok, detail};
}

Outcome erf_round_trip() {
    double worst = 0.0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
        const double y = -0.999 + 1.998 * (k + 0.5) / n;
        worst = std::max(worst, std::abs(std::erf(erf_inv(y)) - y));
    }
    return {worst < 1e-9, fmt("max |erf(erf_inv(y)) - y| = %.1e", worst)};
}

Outcome circle_fit() {
    const Vec2 c(1, 2);
    const double rad = 0.5;
    auto ring = [&](RngStream* noise) {
        std::vector<Vec2> pts;
        for (int k = 0; k < 12; ++k) {
            const double a = 2 * std::numbers::pi * k / 12;
            Vec2 p = c + rad * Vec2(std::cos(a), std::sin(a));
            if (noise) {
                const double nx = noise->normal(), ny = noise->normal();
                p += 0.01 * Vec2(nx, ny);
            }
            pts.push_back(p);
        }
        return pts;
    };
    const auto exact = estimate_circle(ring(nullptr));
    const bool exact_ok = exact && (exact->center - c).norm() < 1e-9 && std::abs(exact->radius - rad) < 1e-9;
    std::vector<double> ce, re;
    for (int seed = 0; seed < 100; ++seed) {
        RngStream rng(seed);
        const auto fit = estimate_circle(ring(&rng));
        ce.push_back(fit ? (fit->center - c).norm() : INFINITY);
        re.push_back(fit ? std::abs(fit->radius - rad) : INFINITY);
    }
    std::sort(ce.begin(), ce.end());
    std::sort(re.begin(), re.end());
    std::vector<Vec2> line;
    for (int k = 0; k < 12; ++k) line.push_back({0.3 * k, 1.0 + 0.15 * k});
    const bool line_rejected = !estimate_circle(line);
    return {exact_ok && ce[94] < 0.02 && re[94] < 0.02 && line_rejected,
            fmt("exact %s; p95 center %.4f radius %.4f; line %s", exact_ok ? "ok" : "bad", ce[94], re[94],
                line_rejected ? "rejected" : "accepted")};
}

Outcome circular_closed_loop() {
    const Vec2 c(-1, 2);
    const double r = 0.6;
    const RobotModel m{0.1, 2.0};
    Vec2 p = c + Vec2(1.7, -0.4), prev = p - c;
    double angle = 0.0;
    for (int k = 0; k < 400; ++k) {
        p = step_robot(p, circular_mode_control(c, r, p, 2.5, 8.0, m.u_max), m);
        const Vec2 cur = p - c;
        angle += std::atan2(prev.x() * cur.y() - prev.y() * cur.x(), prev.dot(cur));
        prev = cur;
    }
    const double rel = std::abs((p - c).norm() - r) / r;
    return {rel <= 0.05 && std::abs(angle) >= 2 * std::numbers::pi,
            fmt("radial error %.2f%%, %.2f revolutions", 100 * rel, angle / (2 * std::numbers::pi))};
}

Outcome adaptive_vs_vanilla() {
    std::vector<double> ad, va;
    int ad_lost = 0, va_lost = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = preset("sensing-temp");
        cfg.seed = seed;
        const auto a = run(cfg);
        cfg.mode = PlannerMode::Vanilla;
        const auto v = run(cfg);
        ad.push_back(mean_trace(a, 100, 301));
        va.push_back(mean_trace(v, 100, 301));
        ad_lost += first_all_sensing_lost(a).has_value();
        va_lost += first_all_sensing_lost(v).has_value();
    }
    double ma = 0, mv = 0;
    for (std::size_t k = 0; k < ad.size(); ++k) {
        ma += ad[k] / ad.size();
        mv += va[k] / va.size();
    }
    return {ma <= 0.5 * mv && va_lost >= 8 && ad_lost <= 2,
            fmt("mean trace adaptive %.4g vs vanilla %.4g (ratio %.3g); all-lost vanilla %d/10, adaptive %d/10", ma,
                mv, ma / mv, va_lost, ad_lost)};
}

Outcome comm_signaling() {
    int good = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = preset("comm-perm");
        cfg.seed = seed;
        const auto recs = run(cfg);
        const Vec2 truth = cfg.comm_zones[0].mean_center;
        int circling = -1;
        std::optional<int> t_inf;
        double err = INFINITY;
        for (const auto& r : recs) {
            for (const auto& rb : r.robots)
                if (rb.mode == Mode::Circular && circling < 0) circling = rb.id;
            for (const auto& inf : r.inferences)
                if (!t_inf && inf.observed == circling) {
                    t_inf = r.t;
                    err = (inf.center - truth).norm();
                }
        }
        bool clean = true;
        if (t_inf)
            for (const auto& r : recs)
                for (const auto& e : r.events)
                    if (e.kind == AttackKind::Comm && e.transition == Transition::Attacked && e.robot != circling &&
                        e.step >= *t_inf + 20)
                        clean = false;
        const bool ok = t_inf && err <= 0.2 && clean;
        good += ok;
        if (!ok) detail += fmt(" seed %d: %s;", static_cast<int>(seed),
                               !t_inf ? "no inference" : err > 0.2 ? fmt("center error %.3f", err).c_str() : "attacked");
    }
    return {good >= 8, fmt("%d/10 seeds inferred within 0.2 m and stayed clear", good) + detail};
}

Outcome team_size() {
    std::vector<double> m2, m5;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (auto [m, vec] : {std::pair{2, &m2}, std::pair{5, &m5}}) {
            auto cfg = presets::vary_team(m, 3);
            cfg.seed = seed;
            const auto recs = run(cfg);
            vec->push_back(mean_trace(recs, 0, static_cast<int>(recs.size())));
        }
    }
    const double a = median(m2), b = median(m5);
    return {b < a, fmt("median mean-trace M=5 %.4g vs M=2 %.4g", b, a)};
}

Outcome complex_survival() {
    using presets::RiskLevel;
    double med[3];
    int attacks[3] = {0, 0, 0};
    int k = 0;
    for (auto risk : {RiskLevel::Conservative, RiskLevel::Regular, RiskLevel::Risky}) {
        std::vector<double> s;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto cfg = presets::complex_env(risk);
            cfg.seed = seed;
            const auto recs = run(cfg);
            s.push_back(steps_until_all_sensing_lost(recs));
            for (const auto& r : recs)
                for (const auto& e : r.events) attacks[k] += e.kind == AttackKind::Sensing;
        }
        med[k++] = median(s);
    }
    // The attack counts are context only; the criterion is the ranking.
    return {med[0] >= med[1] && med[1] >= med[2],
            fmt("median steps survived conservative %.0f, regular %.0f, risky %.0f; "
                "sensing attacks over 5 seeds %d, %d, %d",
                med[0], med[1], med[2], attacks[0], attacks[1], attacks[2])};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("rtrack_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto cfg = preset("combined-temp");
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    run_batch(cfg, seeds, root / "a", 1);
    run_batch(cfg, seeds, root / "b", 1);
    int same = 0, total = 0;
    for (auto s : seeds)
        for (const char* kind : {"steps_", "events_"}) {
            const auto f = kind + std::to_string(s) + ".csv";
            same += read_file(root / "a" / f) == read_file(root / "b" / f);
            ++total;
        }
    fs::remove_all(root);
    return {same == total, fmt("%d/%d CSV files byte-identical", same, total)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"adaptive weight endpoints", weights_endpoints},
        {"EKF oracle and NEES", ekf_oracle},
        {"covariance intersection", ci_properties},
        {"chance-constraint calibration", chance_constraint},
        {"erf_inv round trip", erf_round_trip},
        {"circle fit", circle_fit},
        {"circular mode closed loop", circular_closed_loop},
        {"adaptive vs vanilla, sensing-temp", adaptive_vs_vanilla},
        {"permanent comm signaling", comm_signaling},
        {"team-size trend", team_size},
        {"complex-environment survival", complex_survival},
        {"batch determinism", determinism},
    };
    int failed = 0, k = 0;
    for (const auto& [name, fn] : criteria) {
        ++k;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed;
}
