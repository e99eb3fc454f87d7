#include "nimble/metrics.hpp"

#include <stdexcept>

namespace nimble {

double jain_fairness(const std::vector<double>& values) {
    double sum = 0.0, sq = 0.0;
    for (double v : values) {
        sum += v;
        sq += v * v;
    }
    if (sq == 0.0) return 1.0;
    return sum * sum / (static_cast<double>(values.size()) * sq);
}

BandwidthCurve sweep_sizes(const SweepScenario& scenario,
                           const std::vector<std::uint64_t>& sizes) {
    if (!scenario.topo) throw std::runtime_error("sweep: scenario has no topology");
    if (!scenario.demand) throw std::runtime_error("sweep: scenario has no demand generator");
    if (sizes.empty()) throw std::runtime_error("sweep: empty sizes list");
    for (size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1])
            throw std::runtime_error("sweep: sizes must be strictly increasing");

    BandwidthCurve curve;
    curve.label = scenario.label;
    for (std::uint64_t size : sizes) {
        DemandMatrix demand = scenario.demand(size);
        Plan p = scenario.direct_baseline
                     ? plan_direct_baseline(*scenario.topo, scenario.map, demand)
                     : plan(*scenario.topo, scenario.map, demand, scenario.planner);
        ExchangeResult r = simulate_exchange(*scenario.topo, p, scenario.pipeline, scenario.mode);
        double bw = r.completion > 0.0 ? static_cast<double>(demand.total()) / r.completion : 0.0;
        curve.points.push_back({size, bw});
    }
    return curve;
}

} // namespace nimble
