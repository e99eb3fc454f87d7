#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nimble/planner.hpp"
#include "nimble/simulator.hpp"
#include "nimble/topology.hpp"
#include "nimble/units.hpp"
#include "nimble/workloads.hpp"

using namespace nimble;

namespace {

Plan manual_plan(const Topology& t, const RankMap& m, int src, int dst,
                 std::vector<std::pair<int, double>> flows) {
    PairPlan pp;
    pp.src = src;
    pp.dst = dst;
    double total = 0.0;
    for (auto& [c, b] : flows) total += b;
    pp.demand = static_cast<std::uint64_t>(total + 0.5);
    pp.candidates = enumerate_paths(t, m, src, dst);
    for (auto& [c, b] : flows) pp.flows.push_back({c, b});
    Plan p;
    p.pairs.push_back(std::move(pp));
    return p;
}

} // namespace

TEST_CASE("even 3-way split over a mesh is exactly 3x") {
    Topology t = build_canonical(1, 4, 0, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(4, 4);
    double third = 256.0 * MiB / 3.0;
    Plan split = manual_plan(t, m, 0, 1, {{0, third}, {1, third}, {2, third}});
    Plan direct = manual_plan(t, m, 0, 1, {{0, 256.0 * MiB}});
    PipelineConfig ideal = PipelineConfig::ideal();
    ExchangeResult rs = simulate_exchange(t, split, ideal);
    ExchangeResult rd = simulate_exchange(t, direct, ideal);
    CHECK(speedup(rs, rd) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("even 4-rail split is exactly 4x") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    double q = 256.0 * MiB / 4.0;
    Plan split = manual_plan(t, m, 0, 4, {{0, q}, {1, q}, {2, q}, {3, q}});
    Plan direct = manual_plan(t, m, 0, 4, {{0, 256.0 * MiB}});
    PipelineConfig ideal = PipelineConfig::ideal();
    CHECK(speedup(simulate_exchange(t, split, ideal), simulate_exchange(t, direct, ideal)) ==
          doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("progressive filling fixes the narrow flow and frees the rest") {
    Topology t = build_canonical(1, 3, 0, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    t.links[static_cast<size_t>(t.nvlink_id(0, 0, 1))].capacity = 100e9;
    t.links[static_cast<size_t>(t.nvlink_id(0, 2, 0))].capacity = 30e9;
    RankMap m = make_rank_map(3, 3);
    Plan a = manual_plan(t, m, 0, 1, {{0, 64.0 * MiB}});
    Plan b = manual_plan(t, m, 2, 1, {{1, 32.0 * MiB}}); // via g0, shares 0->1
    Plan both;
    both.pairs = {a.pairs[0], b.pairs[0]};
    ExchangeResult r = simulate_exchange(t, both, PipelineConfig::ideal());
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].completion == doctest::Approx(64.0 * MiB / 70e9).epsilon(1e-12));
    CHECK(r.pairs[1].completion == doctest::Approx(32.0 * MiB / 30e9).epsilon(1e-12));
    CHECK(r.completion == doctest::Approx(32.0 * MiB / 30e9).epsilon(1e-12));
    CHECK(t.link_name(r.bottleneck_link) == "n0.g2->n0.g0");
    CHECK(r.link_utilization[static_cast<size_t>(t.nvlink_id(0, 2, 0))] ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("link_bytes mirror the plan loads") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    DemandMatrix d = gen_skewed_a2av(8, 128 * MiB, 0.8, 2);
    Plan p = plan(t, m, d);
    ExchangeResult r = simulate_exchange(t, p);
    std::vector<double> loads = plan_link_loads(t, p);
    REQUIRE(r.link_bytes.size() == loads.size());
    for (size_t e = 0; e < loads.size(); ++e)
        CHECK(r.link_bytes[e] == doctest::Approx(loads[e]).epsilon(1e-12));
}

TEST_CASE("closed form is invariant under pair order") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    DemandMatrix d = gen_irregular(8, 512 * MiB, 0.6, 9);
    Plan p = plan(t, m, d);
    Plan rev = p;
    std::reverse(rev.pairs.begin(), rev.pairs.end());
    ExchangeResult r1 = simulate_exchange(t, p);
    ExchangeResult r2 = simulate_exchange(t, rev);
    CHECK(r1.completion == r2.completion);
    CHECK(r1.bottleneck_link == r2.bottleneck_link);
}

TEST_CASE("event mode tracks closed form") {
    Topology t = build_canonical(2, 4, 4, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    DemandMatrix d = gen_skewed_a2av(8, 256 * MiB, 0.7, 0);
    Plan p = plan(t, m, d);
    double cf = simulate_exchange(t, p, {}, SimMode::ClosedForm).completion;
    double ev = simulate_exchange(t, p, {}, SimMode::Event).completion;
    CHECK(std::abs(ev - cf) / cf < 0.01);
}

TEST_CASE("empty exchanges and speedup conventions") {
    Topology t = build_canonical(1, 2, 0, gbps(100), gbps(50), Fabric::AllToAllNvLink);
    Plan empty;
    ExchangeResult r = simulate_exchange(t, empty);
    CHECK(r.completion == 0.0);
    CHECK(r.bottleneck_link == -1);
    CHECK(speedup(r, r) == 1.0);
    RankMap m = make_rank_map(2, 2);
    Plan real = manual_plan(t, m, 0, 1, {{0, 1.0 * MiB}});
    CHECK(std::isinf(speedup(r, simulate_exchange(t, real, PipelineConfig::ideal()))));
}

TEST_CASE("malformed plans are rejected") {
    Topology t = build_canonical(1, 3, 0, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(3, 3);
    Plan neg = manual_plan(t, m, 0, 1, {{0, 8.0 * MiB}});
    neg.pairs[0].flows[0].bytes = -1.0;
    CHECK_THROWS(simulate_exchange(t, neg));
    Plan oob = manual_plan(t, m, 0, 1, {{0, 8.0 * MiB}});
    oob.pairs[0].flows[0].candidate = 9;
    CHECK_THROWS(simulate_exchange(t, oob));
}

TEST_CASE("mode names parse both ways") {
    CHECK(parse_sim_mode("closed_form") == SimMode::ClosedForm);
    CHECK(parse_sim_mode("event") == SimMode::Event);
    CHECK_THROWS(parse_sim_mode("fluid"));
    CHECK(sim_mode_name(SimMode::Event) == std::string("event"));
    CHECK(sim_mode_name(SimMode::ClosedForm) == std::string("closed_form"));
}
