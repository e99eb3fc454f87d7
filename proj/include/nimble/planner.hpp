#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nimble/topology.hpp"
#include "nimble/units.hpp"
#include "nimble/workloads.hpp"

namespace nimble {

// A candidate route for one (src, dst) rank pair, expanded to the link ids it
// occupies. `hops` is the logical hop count the penalty term sees: the
// designated direct route counts as 1 even when its expansion touches an
// intra-node link on the way to the NIC.
enum class PathClass { Direct, IntraTwoHop, InterRail };

struct CandidatePath {
    PathClass cls = PathClass::Direct;
    int src_rank = -1;
    int dst_rank = -1;
    int via = -1;   // intermediate GPU ordinal (IntraTwoHop only)
    int rail = -1;  // NIC index (InterRail only)
    bool pair_direct = false;
    int hops = 1;
    std::vector<int> edges;
};

// Congestion cost of a link is its drain time: load divided by capacity when
// normalized, raw bytes otherwise. Multi-hop detours additionally pay a
// per-extra-hop penalty that fades linearly with message size and vanishes at
// the saturation point; below the cutoff detours are disallowed outright.
struct CostModel {
    bool normalize_by_capacity = true;
    double pi = 0.25;
    std::uint64_t small_message_cutoff = 1 * MiB;
    std::uint64_t saturation_intra = 64 * MiB;
    std::uint64_t saturation_inter = 32 * MiB;

    double edge_cost(double load, double capacity) const {
        return normalize_by_capacity ? load / capacity : load;
    }
    double hop_penalty(const CandidatePath& path, std::uint64_t message_bytes) const;

    static CostModel unpenalized();
};

struct PlannerConfig {
    double lambda = 0.5;
    std::uint64_t epsilon = 4 * MiB;
    CostModel cost;
    std::uint64_t max_pair_visits = 1'000'000;
};

struct FlowAssignment {
    int candidate = -1; // index into PairPlan::candidates
    double bytes = 0.0;
};

struct PairPlan {
    int src = -1;
    int dst = -1;
    std::uint64_t demand = 0;
    std::vector<CandidatePath> candidates;
    std::vector<FlowAssignment> flows;
};

struct PlanStats {
    std::uint64_t pair_visits = 0;
    std::uint64_t placements = 0;
    std::uint64_t fallback_pairs = 0;
    std::uint64_t residual_flows = 0;
    std::uint64_t refine_moves = 0;
    double wall_seconds = 0.0;
};

struct Plan {
    std::vector<PairPlan> pairs;
    std::uint64_t epsilon = 4 * MiB;
    PlanStats stats;
};

std::vector<CandidatePath> enumerate_paths(const Topology& topo, const RankMap& map,
                                           int src_rank, int dst_rank);

// Worst drain time over the path's links after tentatively adding `pending`
// bytes to each of them, plus the hop penalty for this message size.
double path_cost(const CandidatePath& path, const std::vector<double>& link_loads,
                 const Topology& topo, const CostModel& cost,
                 std::uint64_t message_bytes, double pending = 0.0);

// Iterative load-balancing pass: sweep the active pairs, each visit routes a
// lambda fraction of the pair's remaining bytes (rounded down to whole epsilon
// chunks, never less than one) chunk by chunk onto the currently cheapest
// candidate. Remainders below epsilon ship whole on the final visit.
Plan plan(const Topology& topo, const RankMap& map, const DemandMatrix& demand,
          const PlannerConfig& config = {});

// Everything on the pair's designated direct route, one flow per pair.
Plan plan_direct_baseline(const Topology& topo, const RankMap& map,
                          const DemandMatrix& demand);

std::vector<double> plan_link_loads(const Topology& topo, const Plan& plan);
double max_normalized_load(const Topology& topo, const Plan& plan);

nlohmann::ordered_json plan_to_json(const Plan& plan);
Plan plan_from_json(const Topology& topo, const RankMap& map, const nlohmann::json& j);
std::string plan_to_text(const Topology& topo, const Plan& plan);

} // namespace nimble
