#include "nimble/report.hpp"

namespace nimble {

std::string report_csv(const std::vector<ScenarioRow>& rows) {
    std::string out = "scenario,size_bytes,ratio,baseline_completion_s,nimble_completion_s,"
                      "speedup,bottleneck_link,max_norm_load_baseline,max_norm_load_nimble\n";
    for (const ScenarioRow& r : rows) {
        out += r.scenario + ',' + std::to_string(r.size_bytes) + ',' + format_double(r.ratio) +
               ',' + format_double(r.baseline_completion_s) + ',' +
               format_double(r.nimble_completion_s) + ',' + format_double(r.speedup) + ',' +
               r.bottleneck_link + ',' + format_double(r.max_norm_load_baseline) + ',' +
               format_double(r.max_norm_load_nimble) + '\n';
    }
    return out;
}

nlohmann::ordered_json report_json(const Topology& topo, const std::vector<ScenarioRow>& rows) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json links = nlohmann::ordered_json::array();
    for (const Link& l : topo.links) links.push_back(topo.link_name(l.id));
    j["links"] = std::move(links);
    nlohmann::ordered_json out_rows = nlohmann::ordered_json::array();
    for (const ScenarioRow& r : rows) {
        out_rows.push_back({{"scenario", r.scenario},
                            {"size_bytes", r.size_bytes},
                            {"ratio", r.ratio},
                            {"baseline_completion_s", r.baseline_completion_s},
                            {"nimble_completion_s", r.nimble_completion_s},
                            {"speedup", r.speedup},
                            {"bottleneck_link", r.bottleneck_link},
                            {"max_norm_load_baseline", r.max_norm_load_baseline},
                            {"max_norm_load_nimble", r.max_norm_load_nimble},
                            {"link_utilization_baseline", r.link_utilization_baseline},
                            {"link_utilization_nimble", r.link_utilization_nimble}});
    }
    j["rows"] = std::move(out_rows);
    return j;
}

} // namespace nimble
