#include <doctest.h>

#include <cmath>

#include "nimble/planner.hpp"
#include "nimble/topology.hpp"
#include "nimble/units.hpp"
#include "nimble/workloads.hpp"

using namespace nimble;

namespace {

Topology intra4() { return build_canonical(1, 4, 0, gbps(120), gbps(50), Fabric::AllToAllNvLink); }

bool quantized(const Plan& p) {
    double eps = static_cast<double>(p.epsilon);
    for (const PairPlan& pp : p.pairs) {
        int residuals = 0;
        double placed = 0.0;
        for (const FlowAssignment& f : pp.flows) {
            placed += f.bytes;
            if (std::fmod(f.bytes, eps) != 0.0) ++residuals;
        }
        if (placed != static_cast<double>(pp.demand)) return false;
        if (residuals > 1) return false;
    }
    return true;
}

} // namespace

TEST_CASE("candidate enumeration: intra mesh") {
    Topology t = intra4();
    RankMap m = make_rank_map(4, 4);
    auto cands = enumerate_paths(t, m, 0, 1);
    REQUIRE(cands.size() == 3);
    CHECK(cands[0].cls == PathClass::Direct);
    CHECK(cands[0].pair_direct);
    CHECK(cands[0].hops == 1);
    CHECK(cands[0].edges == std::vector<int>{t.nvlink_id(0, 0, 1)});
    CHECK(cands[1].cls == PathClass::IntraTwoHop);
    CHECK(cands[1].via == 2);
    CHECK(cands[1].hops == 2);
    CHECK(cands[1].edges == std::vector<int>{t.nvlink_id(0, 0, 2), t.nvlink_id(0, 2, 1)});
    CHECK(cands[2].via == 3);
    CHECK_THROWS(enumerate_paths(t, m, 1, 1));
    CHECK_THROWS(enumerate_paths(t, m, 0, 7));
}

TEST_CASE("candidate enumeration: nvswitch has no detours") {
    Topology t = build_canonical(1, 8, 0, gbps(120), gbps(50), Fabric::NvSwitch);
    RankMap m = make_rank_map(8, 8);
    auto cands = enumerate_paths(t, m, 2, 6);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].cls == PathClass::Direct);
    CHECK(cands[0].edges == std::vector<int>{t.port_up_id(0, 2), t.port_down_id(0, 6)});
}

TEST_CASE("candidate enumeration: rails are destination-matched") {
    Topology t = build_canonical(2, 4, 2, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    auto cands = enumerate_paths(t, m, 0, 5); // n0.g0 -> n1.g1
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].cls == PathClass::InterRail);
    CHECK(cands[0].rail == 1); // dst ordinal 1 % 2 nics
    CHECK(cands[0].pair_direct);
    CHECK(cands[0].hops == 1);
    CHECK(cands[0].edges == std::vector<int>{t.nvlink_id(0, 0, 1), t.attach_up_id(0, 1),
                                             t.rail_id(0, 1, 1), t.attach_down_id(1, 1)});
    CHECK(cands[1].rail == 0);
    CHECK(cands[1].hops == 2); // source sits on rail 0, destination does not
    CHECK(cands[1].edges == std::vector<int>{t.attach_up_id(0, 0), t.rail_id(0, 1, 0),
                                             t.attach_down_id(1, 0), t.nvlink_id(1, 0, 1)});
    CHECK_THROWS(enumerate_paths(build_canonical(2, 2, 0, gbps(100), gbps(50),
                                                 Fabric::AllToAllNvLink),
                                 make_rank_map(4, 2), 0, 2));
}

TEST_CASE("hop penalty gates small messages and fades out") {
    CostModel cost;
    CandidatePath via;
    via.cls = PathClass::IntraTwoHop;
    via.hops = 2;
    CHECK(std::isinf(cost.hop_penalty(via, MiB)));
    CHECK(std::isinf(cost.hop_penalty(via, 512 * KiB)));
    CHECK(cost.hop_penalty(via, 32 * MiB) == doctest::Approx(0.125));
    CHECK(cost.hop_penalty(via, 64 * MiB) == 0.0);
    CHECK(cost.hop_penalty(via, 256 * MiB) == 0.0);
    CandidatePath direct;
    direct.hops = 1;
    CHECK(cost.hop_penalty(direct, KiB) == 0.0);
    CHECK(CostModel::unpenalized().hop_penalty(via, KiB) == 0.0);
}

TEST_CASE("single 256 MiB pair splits 88/84/84 across the mesh") {
    Topology t = intra4();
    RankMap m = make_rank_map(4, 4);
    DemandMatrix d = gen_p2p(4, 0, 1, 256 * MiB);
    Plan p = plan(t, m, d);
    REQUIRE(p.pairs.size() == 1);
    REQUIRE(p.pairs[0].flows.size() == 3);
    CHECK(p.pairs[0].flows[0].candidate == 0);
    CHECK(p.pairs[0].flows[0].bytes == 88.0 * MiB);
    CHECK(p.pairs[0].flows[1].bytes == 84.0 * MiB);
    CHECK(p.pairs[0].flows[2].bytes == 84.0 * MiB);
    CHECK(p.stats.pair_visits == 7);
    CHECK(p.stats.placements == 64);
    CHECK(quantized(p));
    CHECK(max_normalized_load(t, p) == 88.0 * MiB / gbps(120));
}

TEST_CASE("small messages stay on the direct route") {
    Topology t = intra4();
    RankMap m = make_rank_map(4, 4);
    for (std::uint64_t size : {64 * KiB, 512 * KiB, MiB}) {
        Plan p = plan(t, m, gen_p2p(4, 0, 1, size));
        REQUIRE(p.pairs[0].flows.size() == 1);
        CHECK(p.pairs[0].flows[0].candidate == 0);
        CHECK(p.pairs[0].flows[0].bytes == static_cast<double>(size));
    }
}

TEST_CASE("planner output is deterministic") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    DemandMatrix d = gen_skewed_a2av(8, 128 * MiB, 0.7, 0);
    Plan a = plan(t, m, d);
    Plan b = plan(t, m, d);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        REQUIRE(a.pairs[i].flows.size() == b.pairs[i].flows.size());
        for (size_t f = 0; f < a.pairs[i].flows.size(); ++f) {
            CHECK(a.pairs[i].flows[f].candidate == b.pairs[i].flows[f].candidate);
            CHECK(a.pairs[i].flows[f].bytes == b.pairs[i].flows[f].bytes);
        }
    }
    CHECK(quantized(a));
}

TEST_CASE("refinement never loses to the direct layout") {
    // Two-node corner case: the only route for 2->3 shares an NvLink with the
    // rail-0 detour of 1->3, so spreading 1->3 is a mistake the sweep alone
    // used to make under the load-only cost.
    Topology t = build_canonical(2, 2, 2, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(4, 2);
    DemandMatrix d;
    d.ranks = 4;
    d.bytes.assign(16, 0);
    d.at(2, 3) = 28 * MiB;
    d.at(1, 3) = 8 * MiB;
    PlannerConfig unpen;
    unpen.cost = CostModel::unpenalized();
    Plan p = plan(t, m, d, unpen);
    Plan base = plan_direct_baseline(t, m, d);
    CHECK(max_normalized_load(t, p) == doctest::Approx(28.0 * MiB / gbps(120)).epsilon(1e-12));
    CHECK(max_normalized_load(t, p) <= max_normalized_load(t, base));
}

TEST_CASE("visit budget exhaustion falls back to direct and conserves bytes") {
    Topology t = intra4();
    RankMap m = make_rank_map(4, 4);
    DemandMatrix d = gen_skewed_a2av(4, 64 * MiB, 0.5, 0);
    PlannerConfig pc;
    pc.max_pair_visits = 3;
    Plan p = plan(t, m, d, pc);
    CHECK(p.stats.fallback_pairs > 0);
    CHECK(quantized(p));
}

TEST_CASE("plan json round-trip") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    DemandMatrix d = gen_irregular(8, 512 * MiB, 0.5, 3);
    Plan p = plan(t, m, d);
    Plan back = plan_from_json(t, m, plan_to_json(p));
    REQUIRE(back.pairs.size() == p.pairs.size());
    for (size_t i = 0; i < p.pairs.size(); ++i) {
        REQUIRE(back.pairs[i].flows.size() == p.pairs[i].flows.size());
        for (size_t f = 0; f < p.pairs[i].flows.size(); ++f) {
            CHECK(back.pairs[i].flows[f].candidate == p.pairs[i].flows[f].candidate);
            CHECK(back.pairs[i].flows[f].bytes == p.pairs[i].flows[f].bytes);
        }
    }
    CHECK(back.stats.placements == p.stats.placements);
    CHECK(plan_to_text(t, back) == plan_to_text(t, p));

    nlohmann::json j = plan_to_json(p);
    j["pairs"][0]["flows"][0]["bytes"] = 1.0; // break conservation
    CHECK_THROWS(plan_from_json(t, m, j));
}

TEST_CASE("planner config validation") {
    Topology t = intra4();
    RankMap m = make_rank_map(4, 4);
    DemandMatrix d = gen_p2p(4, 0, 1, MiB);
    PlannerConfig bad;
    bad.lambda = 0.0;
    CHECK_THROWS(plan(t, m, d, bad));
    bad.lambda = 1.5;
    CHECK_THROWS(plan(t, m, d, bad));
    PlannerConfig zero;
    zero.epsilon = 0;
    CHECK_THROWS(plan(t, m, d, zero));
}
