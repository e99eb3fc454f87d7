#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nimble/simulator.hpp"

namespace nimble {

// Jain's index (sum x)^2 / (n * sum x^2): 1 when perfectly even, 1/n when a
// single entry carries everything. Empty or all-zero input counts as even.
double jain_fairness(const std::vector<double>& values);

struct SweepScenario {
    std::string label;
    const Topology* topo = nullptr;
    RankMap map;
    std::function<DemandMatrix(std::uint64_t size)> demand;
    PlannerConfig planner;
    PipelineConfig pipeline;
    SimMode mode = SimMode::ClosedForm;
    bool direct_baseline = false; // skip planning, route everything direct
};

struct BandwidthPoint {
    std::uint64_t size_bytes = 0;
    double bandwidth = 0.0; // payload bytes / completion seconds
};

struct BandwidthCurve {
    std::string label;
    std::vector<BandwidthPoint> points;
};

// One plan + simulation per size, sizes strictly increasing.
BandwidthCurve sweep_sizes(const SweepScenario& scenario,
                           const std::vector<std::uint64_t>& sizes);

} // namespace nimble
