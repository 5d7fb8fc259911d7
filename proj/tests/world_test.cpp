#include <gtest/gtest.h>

#include <algorithm>

#include "gen.hpp"
#include "rtrack/world.hpp"

using namespace rtrack;

namespace {

WorldState small_world(int m = 3, int n = 3) {
    WorldState w;
    for (int i = 0; i < m; ++i) w.robots.push_back({i, Vec2(i, 0.0), {}, 0, -1, -1});
    for (int j = 0; j < n; ++j) w.targets.push_back({j, Vec4(j, 1.0, 0.0, 0.0), 0});
    w.estimate_league.mean = Vec::Zero(4 * n);
    w.estimate_league.covariance = Mat::Identity(4 * n, 4 * n);
    w.knowledge.robots.resize(m);
    w.sensing_zones.push_back({0, Vec2(0.1, 0.0), 0.3 * Mat2::Identity(), 1.5, FailureKind::Temporary});
    w.comm_zones.push_back({1, Vec2::Zero(), 0.01 * Mat2::Identity(), 0.5, FailureKind::Permanent});
    return w;
}

// Reachability by repeated relaxation over all pairs.
std::vector<std::vector<int>> brute_components(const Adjacency& g) {
    const int m = static_cast<int>(g.size());
    std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) reach[i][j] = i == j || g[i][j];
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
    std::vector<std::vector<int>> out;
    std::vector<bool> seen(m, false);
    for (int i = 0; i < m; ++i) {
        if (seen[i]) continue;
        auto& c = out.emplace_back();
        for (int j = 0; j < m; ++j)
            if (reach[i][j]) {
                c.push_back(j);
                seen[j] = true;
            }
    }
    return out;
}

ZoneRecord record(int id, Vec2 c, Provenance p, int revision = 0) {
    ZoneRecord r;
    r.zone_id = id;
    r.center = c;
    r.radius = 1.0;
    r.provenance = p;
    r.revision = revision;
    return r;
}

std::size_t total_records(const KnowledgeBase& kb) {
    std::size_t n = kb.league.sensing.size() + kb.league.comm.size();
    for (const auto& r : kb.robots) n += r.sensing.size() + r.comm.size();
    return n;
}

}  // namespace

TEST(ValidateWorld, WellFormedWorldHasNoViolations) { EXPECT_TRUE(validate_world(small_world()).empty()); }

TEST(ValidateWorld, NegativeRadiusNamesTheZone) {
    auto w = small_world();
    w.sensing_zones[0].radius = -1.0;
    const auto v = validate_world(w);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find("sensing zone 0"), std::string::npos);
}

TEST(ValidateWorld, AsymmetricEstimateCovariance) {
    auto w = small_world();
    w.estimate_league.covariance(0, 1) += 1e-3;
    const auto v = validate_world(w);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find("league estimate"), std::string::npos);
}

TEST(ValidateWorld, NonContiguousIdsAndBadCooldown) {
    auto w = small_world();
    w.robots[2].id = 7;
    w.robots[0].cooldown_remaining = 11;
    EXPECT_EQ(validate_world(w, 10).size(), 2u);
}

TEST(LeagueMembers, CompleteGraph) {
    auto w = small_world();
    Adjacency g(3, std::vector<bool>(3, true));
    for (int i = 0; i < 3; ++i) g[i][i] = false;
    EXPECT_EQ(league_members(w, g), (std::vector<std::vector<int>>{{0, 1, 2}}));
}

TEST(LeagueMembers, SingleEdge) {
    auto w = small_world();
    Adjacency g(3, std::vector<bool>(3, false));
    g[0][1] = g[1][0] = true;
    EXPECT_EQ(league_members(w, g), (std::vector<std::vector<int>>{{0, 1}, {2}}));
}

TEST(LeagueMembers, TwoLeaguesOfFive) {
    auto w = small_world(5);
    Adjacency g(5, std::vector<bool>(5, false));
    for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {3, 4}}) g[i][j] = g[j][i] = true;
    const auto got = league_members(w, g);
    EXPECT_EQ(got, (std::vector<std::vector<int>>{{0, 1, 2}, {3, 4}}));
    EXPECT_EQ(got, brute_components(g));
}

TEST(LeagueMembers, MatchesBruteForceReachability) {
    RngStream rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const int m = gen::integer(rng, 1, 8);
        const auto g = gen::graph(rng, m, gen::uniform(rng, 0.0, 0.6));
        const auto got = league_members(small_world(m), g);
        ASSERT_EQ(got, brute_components(g)) << "trial " << trial;
        std::vector<int> all;
        for (const auto& c : got) all.insert(all.end(), c.begin(), c.end());
        std::sort(all.begin(), all.end());
        for (int i = 0; i < m; ++i) ASSERT_EQ(all[i], i);
    }
}

TEST(MergeKnowledge, UnionFromOneMember) {
    KnowledgeBase kb;
    kb.robots.resize(3);
    kb.robots[0].sensing[0] = record(0, {0, 0}, Provenance::TrueParams);
    const int league[] = {0, 1};
    const auto out = merge_knowledge(kb, league);
    EXPECT_TRUE(out.robots[0].sensing.contains(0));
    EXPECT_TRUE(out.robots[1].sensing.contains(0));
    EXPECT_FALSE(out.robots[2].sensing.contains(0));
    EXPECT_TRUE(out.league.sensing.contains(0));
}

TEST(MergeKnowledge, DisjointSetsBecomeTheUnion) {
    KnowledgeBase kb;
    kb.robots.resize(2);
    kb.robots[0].sensing[0] = record(0, {0, 0}, Provenance::TrueParams);
    kb.robots[1].sensing[1] = record(1, {3, 0}, Provenance::TrueParams);
    const int league[] = {0, 1};
    const auto out = merge_knowledge(kb, league);
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(out.robots[i].sensing.size(), 2u);
        EXPECT_TRUE(out.robots[i].sensing.contains(0) && out.robots[i].sensing.contains(1));
    }
}

TEST(MergeKnowledge, TrueParamsBeatCircleFit) {
    KnowledgeBase kb;
    kb.robots.resize(2);
    const auto truth = record(5, {1.0, 2.0}, Provenance::TrueParams);
    kb.robots[0].comm[5] = truth;
    kb.robots[1].comm[5] = record(5, {1.1, 2.2}, Provenance::CircleFit, 4);
    const int league[] = {1, 0};
    const auto out = merge_knowledge(kb, league);
    EXPECT_EQ(out.robots[0].comm.at(5), truth);
    EXPECT_EQ(out.robots[1].comm.at(5), truth);
    EXPECT_EQ(out.league.comm.at(5), truth);
}

TEST(MergeKnowledge, NewerCircleFitRevisionWins) {
    KnowledgeBase kb;
    kb.robots.resize(2);
    kb.robots[0].comm[1000] = record(1000, {0, 0}, Provenance::CircleFit, 1);
    const auto newer = record(1000, {0.1, 0}, Provenance::CircleFit, 2);
    kb.robots[1].comm[1000] = newer;
    const int league[] = {0, 1};
    EXPECT_EQ(merge_knowledge(kb, league).robots[0].comm.at(1000), newer);
}

TEST(MergeKnowledge, IdempotentAndMonotone) {
    RngStream rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int m = gen::integer(rng, 1, 6);
        KnowledgeBase kb;
        kb.robots.resize(m);
        for (auto& rk : kb.robots)
            for (int z = 0; z < 4; ++z) {
                if (rng.bernoulli(0.4))
                    rk.sensing[z] = record(z, gen::point(rng, 5), Provenance::TrueParams);
                if (rng.bernoulli(0.4))
                    rk.comm[z] = record(z, gen::point(rng, 5),
                                        rng.bernoulli(0.5) ? Provenance::TrueParams : Provenance::CircleFit,
                                        gen::integer(rng, 0, 3));
            }
        std::vector<int> league;
        for (int i = 0; i < m; ++i)
            if (rng.bernoulli(0.6)) league.push_back(i);

        const auto once = merge_knowledge(kb, league);
        EXPECT_EQ(merge_knowledge(once, league), once);
        for (int i = 0; i < m; ++i) {
            for (const auto& [id, r] : kb.robots[i].sensing) EXPECT_TRUE(once.robots[i].sensing.contains(id));
            for (const auto& [id, r] : kb.robots[i].comm) EXPECT_TRUE(once.robots[i].comm.contains(id));
        }
        EXPECT_GE(total_records(once), total_records(kb));
    }
}
