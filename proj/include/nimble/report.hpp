#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nimble/topology.hpp"

namespace nimble {

struct ScenarioRow {
    std::string scenario;
    std::uint64_t size_bytes = 0;
    double ratio = 0.0; // hotspot ratio for skewed scenarios, 0 otherwise
    double baseline_completion_s = 0.0;
    double nimble_completion_s = 0.0;
    double speedup = 0.0;
    std::string bottleneck_link;
    double max_norm_load_baseline = 0.0;
    double max_norm_load_nimble = 0.0;
    std::vector<double> link_utilization_baseline;
    std::vector<double> link_utilization_nimble;
};

std::string report_csv(const std::vector<ScenarioRow>& rows);
nlohmann::ordered_json report_json(const Topology& topo, const std::vector<ScenarioRow>& rows);

} // namespace nimble
