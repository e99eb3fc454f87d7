#pragma once

#include <cstdint>
#include <vector>

#include "nimble/planner.hpp"
#include "nimble/topology.hpp"
#include "nimble/workloads.hpp"

namespace nimble {

// Small instance for the exhaustive reference solver: each demand ships an
// integer number of epsilon-sized chunks.
struct ExactDemand {
    int src = -1;
    int dst = -1;
    int chunks = 0;
};

struct ExactInstance {
    std::uint64_t epsilon = 4 * MiB;
    std::vector<ExactDemand> demands;
};

struct ExactResult {
    double z_star = 0.0;                // minimal max normalized link load
    std::uint64_t explored = 0;         // partial assignments tried
    std::vector<std::vector<int>> best; // per demand, chunks per candidate
};

// Branch and bound over all ways to split each demand's chunks across its
// candidate routes. Exponential, so instances are capped at 24 chunks total.
ExactResult solve_exact(const Topology& topo, const RankMap& map, const ExactInstance& inst);

inline constexpr int kExactChunkCap = 24;

// How far a plan's peak load sits above the optimum. Both zero means the
// instance is empty: ratio 1. Only the optimum zero means the plan wastes
// capacity on a free instance: ratio infinity.
double approximation_gap(double plan_max_norm_load, double z_star);

DemandMatrix exact_instance_demand(const ExactInstance& inst, int ranks);

} // namespace nimble
