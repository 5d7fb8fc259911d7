#include <gtest/gtest.h>

#include <cmath>

#include "rtrack/presets.hpp"
#include "rtrack/simulator.hpp"

using namespace rtrack;

namespace {

ScenarioConfig seeded(ScenarioConfig c, std::uint64_t seed, PlannerMode mode = PlannerMode::Adaptive) {
    c.seed = seed;
    c.mode = mode;
    return c;
}

bool has_event(const std::vector<StepRecord>& recs, Transition tr) {
    for (const auto& r : recs)
        for (const auto& e : r.events)
            if (e.transition == tr) return true;
    return false;
}

}  // namespace

TEST(Metrics, MseExample) {
    std::vector<TargetState> truth{{0, Vec4(0, 0, 0, 0), 0}, {1, Vec4(1, 1, 0, 0), 0}};
    TargetEstimate est{Vec::Zero(8), Mat::Identity(8, 8)};
    est.mean.segment<2>(0) << 1, 0;
    est.mean.segment<2>(4) << 1, 1;
    EXPECT_DOUBLE_EQ(mse(truth, est), 0.5);
    EXPECT_DOUBLE_EQ(trace_metric(est), 8.0);
    EXPECT_THROW(mse(std::span(truth).first(1), est), DomainError);
}

TEST(Presets, Shapes) {
    const auto s = preset("sensing-temp");
    EXPECT_EQ(s.robot_count(), 3);
    EXPECT_EQ(s.target_count(), 3);
    ASSERT_EQ(s.sensing_zones.size(), 1u);
    EXPECT_EQ(s.sensing_zones[0].kind, FailureKind::Temporary);

    const auto c = preset("complex-env(conservative)");
    EXPECT_DOUBLE_EQ(c.risk.eps1, 0.01);
    EXPECT_EQ(c.steps, 600);
    EXPECT_EQ(c.sensing_zones.size(), 3u);

    const auto v = preset("vary-team(5,3)");
    EXPECT_EQ(v.robot_count(), 5);
    EXPECT_EQ(v.target_count(), 3);

    EXPECT_THROW(preset("vary-team(6,3)"), ConfigError);
    EXPECT_THROW(preset("nope"), ConfigError);
    for (const auto& name : preset_names())
        if (name != "vary-team(M,N)") EXPECT_TRUE(validate_scenario(preset(name)).empty()) << name;
}

TEST(ValidateScenario, ReportsEveryBadKey) {
    auto c = preset("default");
    c.risk.eps1 = 0.7;
    c.observation_window = 3;
    const auto issues = validate_scenario(c);
    ASSERT_EQ(issues.size(), 2u);
    EXPECT_EQ(issues[0].key, "risk.eps1");
    EXPECT_EQ(issues[1].key, "coordination.window");
    EXPECT_THROW(Simulator{c}, ConfigError);
}

TEST(Simulator, NoZonesNoEventsAndBoundedError) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto recs = run(seeded(preset("default"), seed));
        ASSERT_EQ(recs.size(), 300u);
        for (const auto& r : recs) {
            ASSERT_TRUE(r.events.empty());
            for (const auto& rb : r.robots) ASSERT_TRUE(rb.status.healthy());
        }
        // 0.1 m^2 is about a third of a metre of error per target.
        for (std::size_t t = 50; t < recs.size(); ++t) ASSERT_LT(recs[t].mse, 0.1) << "seed " << seed << " t " << t;
    }
}

TEST(Simulator, RecordsStepIndexAndPhaseOrder) {
    const auto recs = run(seeded(preset("sensing-temp"), 4));
    for (std::size_t t = 0; t < recs.size(); ++t) {
        ASSERT_EQ(recs[t].t, static_cast<int>(t));
        ASSERT_EQ(recs[t].robots.size(), 3u);
        ASSERT_EQ(recs[t].targets.size(), 3u);
        for (int p = 1; p < kPhaseCount; ++p) ASSERT_LT(recs[t].phase_stamps[p - 1], recs[t].phase_stamps[p]);
    }
}

TEST(Simulator, SameSeedSameRun) {
    const auto a = run(seeded(preset("combined-perm"), 5));
    const auto b = run(seeded(preset("combined-perm"), 5));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        ASSERT_EQ(a[t].mse, b[t].mse);
        ASSERT_EQ(a[t].trace, b[t].trace);
        ASSERT_EQ(a[t].events, b[t].events);
        for (std::size_t i = 0; i < a[t].robots.size(); ++i) ASSERT_EQ(a[t].robots[i].position, b[t].robots[i].position);
    }
}

TEST(Simulator, DifferentSeedsDiffer) {
    const auto a = run(seeded(preset("default"), 1));
    const auto b = run(seeded(preset("default"), 2));
    EXPECT_NE(a.back().mse, b.back().mse);
}

TEST(Simulator, FinishedSimulatorRefusesToStep) {
    auto c = preset("default");
    c.steps = 2;
    Simulator sim(c);
    sim.step();
    sim.step();
    EXPECT_TRUE(sim.done());
    EXPECT_THROW(sim.step(), SimulationError);
}

TEST(Simulator, TemporarySensingAttackAndRecovery) {
    int both = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto recs = run(seeded(preset("sensing-temp"), seed));
        both += has_event(recs, Transition::Attacked) && has_event(recs, Transition::Recovered);
    }
    EXPECT_GE(both, 8);
}

TEST(Simulator, BaselineLosesTheTeamToAPermanentZone) {
    int lost = 0, entered = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto cfg = seeded(preset("sensing-perm"), seed, PlannerMode::Vanilla);
        const auto recs = run(cfg);
        lost += first_all_sensing_lost(recs).has_value();
        const auto& z = cfg.sensing_zones[0];
        bool in = false;
        for (const auto& r : recs)
            for (const auto& rb : r.robots) in = in || (rb.position - z.mean_center).norm() <= z.radius;
        entered += in;
    }
    EXPECT_GE(lost, 8);
    EXPECT_GE(entered, 8);
}

TEST(Simulator, StatusInvariants) {
    for (const char* name : {"sensing-temp", "sensing-perm", "comm-perm", "combined-temp", "combined-perm"}) {
        auto cfg = seeded(preset(name), 6);
        const auto recs = run(cfg);
        const int period = cfg.hazard.activation_period_steps;
        for (std::size_t t = 1; t < recs.size(); ++t) {
            for (std::size_t i = 0; i < recs[t].robots.size(); ++i) {
                const auto& prev = recs[t - 1].robots[i];
                const auto& cur = recs[t].robots[i];
                if (recs[t].t % period != 0) ASSERT_EQ(prev.status, cur.status) << name << " t=" << t;
                if (prev.status.sensing == Capability::PermFailed)
                    ASSERT_EQ(cur.status.sensing, Capability::PermFailed) << name;
                if (prev.status.comm == Capability::PermFailed) ASSERT_EQ(cur.status.comm, Capability::PermFailed) << name;
                if (prev.mode == Mode::Circular) ASSERT_EQ(cur.mode, Mode::Circular) << name << " t=" << t;
                ASSERT_LE(cur.control.norm(), cfg.u_max + 1e-12);
            }
        }
    }
}

TEST(Simulator, CountsMatchTheScenario) {
    for (auto [m, n] : vary_team_sweep()) {
        auto cfg = presets::vary_team(m, n);
        cfg.steps = 20;
        const auto recs = run(cfg);
        ASSERT_EQ(static_cast<int>(recs.back().robots.size()), m);
        ASSERT_EQ(static_cast<int>(recs.back().targets.size()), n);
    }
}

TEST(Simulator, KnowledgeOnlyGrows) {
    Simulator sim(seeded(preset("combined-perm"), 7));
    KnowledgeBase prev = sim.world().knowledge;
    while (!sim.done()) {
        sim.step();
        const auto& cur = sim.world().knowledge;
        for (std::size_t i = 0; i < prev.robots.size(); ++i)
            for (ZoneMap ZoneKnowledge::*maps : {&ZoneKnowledge::sensing, &ZoneKnowledge::comm})
                for (const auto& [id, rec] : prev.robots[i].*maps) {
                    const auto& now = cur.robots[i].*maps;
                    ASSERT_TRUE(now.contains(id)) << "robot " << i << " zone " << id;
                    ASSERT_GE(now.at(id).revision, rec.revision);
                }
        prev = cur;
    }
}

TEST(Simulator, NoCircleInferenceWithoutPermanentCommFailure) {
    for (const char* name : {"default", "sensing-temp", "sensing-perm", "comm-temp", "combined-temp"})
        for (std::uint64_t seed = 1; seed <= 3; ++seed)
            for (const auto& r : run(seeded(preset(name), seed))) ASSERT_TRUE(r.inferences.empty()) << name << " " << seed;
}

TEST(Simulator, TraceDropsAfterTheFirstUpdate) {
    const auto recs = run(seeded(preset("default"), 8));
    const auto cfg = preset("default");
    EXPECT_LT(recs[0].trace, cfg.init_cov * 4 * cfg.target_count());
}

TEST(Simulator, CovarianceStaysSymmetricPositiveDefinite) {
    auto check = [](const TargetEstimate& e) {
        if ((e.covariance - e.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-9) return false;
        return Eigen::SelfAdjointEigenSolver<Mat>(e.covariance, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
    };
    for (const auto& name : preset_names()) {
        if (name == "vary-team(M,N)") continue;
        Simulator sim(seeded(preset(name), 9));
        while (!sim.done()) {
            sim.step();
            const auto& w = sim.world();
            ASSERT_TRUE(check(w.estimate_league)) << name << " t=" << w.t;
            for (const auto& [id, est] : w.estimate_solo) ASSERT_TRUE(check(est)) << name << " robot " << id;
        }
    }
}
