#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nimble/pipeline.hpp"
#include "nimble/planner.hpp"
#include "nimble/topology.hpp"

namespace nimble {

// ClosedForm: fluid max-min sharing with progressive filling, each flow's
// finish shifted by its pipeline fill overhead. Event: chunk-level discrete
// events with round-robin link arbitration and bounded staging buffers.
// The two agree on steady-state bandwidth; Event additionally resolves
// chunk-granularity and buffer effects.
enum class SimMode { ClosedForm, Event };

struct PairResult {
    int src = -1;
    int dst = -1;
    double bytes = 0.0;
    double completion = 0.0; // when the pair's last flow lands
};

struct ExchangeResult {
    double completion = 0.0;
    std::vector<PairResult> pairs;
    std::vector<double> link_bytes;       // per link id
    std::vector<double> link_utilization; // bytes / (capacity * completion)
    int bottleneck_link = -1;             // most utilized link, -1 if idle
};

ExchangeResult simulate_exchange(const Topology& topo, const Plan& plan,
                                 const PipelineConfig& cfg = {},
                                 SimMode mode = SimMode::ClosedForm);

// How much faster `a` finishes than `b`: completion(b) / completion(a).
// Two empty exchanges tie at 1.
double speedup(const ExchangeResult& a, const ExchangeResult& b);

SimMode parse_sim_mode(std::string_view name);
const char* sim_mode_name(SimMode mode);

} // namespace nimble
