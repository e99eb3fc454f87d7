// Command-line driver: build or load a topology, generate a workload, plan
// the exchange, simulate it against the direct baseline, and emit reports.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nimble/calibration.hpp"
#include "nimble/metrics.hpp"
#include "nimble/oracle.hpp"
#include "nimble/pipeline.hpp"
#include "nimble/planner.hpp"
#include "nimble/report.hpp"
#include "nimble/simulator.hpp"
#include "nimble/topology.hpp"
#include "nimble/units.hpp"
#include "nimble/workloads.hpp"

using namespace nimble;

namespace {

// Usage problems exit 2, execution problems exit 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioSpec {
    // topology
    int nodes = 1;
    int gpus = 4;
    int nics = 0;
    double nvlink_gbps = 120.0;
    double rail_gbps = 50.0;
    std::string fabric = "alltoall";
    std::string topo_file;
    int ranks = 0; // 0 = nodes * gpus

    // workload (exactly one)
    bool p2p = false;
    bool skewed = false;
    bool stencil = false;
    bool aggregator = false;
    bool irregular = false;
    double size_mb = 256.0;
    double ratio = 0.7;
    int hot = 0;
    int src = 0;
    int dst = 1;
    double sparsity = 0.5;
    std::vector<int> dsts;
    std::uint64_t seed = 1;

    // planner
    double lambda = 0.5;
    double chunk_mb = 4.0;
    double pi = 0.25;

    // pipeline
    double buffer_mb = 10.0;
    double pipe_chunk_kb = 512.0;
    double hop_latency_us = 2.0;
    double nic_latency_us = 2.0;
    int channels = 1;

    std::string mode = "closed_form";
    std::string baseline = "nimble";
    std::string out_dir;
};

void add_topology_options(CLI::App* cmd, ScenarioSpec& s) {
    cmd->add_option("--nodes", s.nodes, "Number of nodes")->capture_default_str();
    cmd->add_option("--gpus", s.gpus, "GPUs per node")->capture_default_str();
    cmd->add_option("--nics", s.nics, "NICs per node (0 = none; required for multi-node)")
        ->capture_default_str();
    cmd->add_option("--nvlink-gbps", s.nvlink_gbps, "NvLink capacity in GB/s")
        ->capture_default_str();
    cmd->add_option("--rail-gbps", s.rail_gbps, "Rail capacity in GB/s (attach links get 2x)")
        ->capture_default_str();
    cmd->add_option("--fabric", s.fabric, "Intra-node fabric: alltoall or nvswitch")
        ->capture_default_str();
    cmd->add_option("--topo-file", s.topo_file,
                    "Load topology from file instead of building a canonical one");
    cmd->add_option("--ranks", s.ranks, "Communicator size (default nodes*gpus)");
}

void add_workload_options(CLI::App* cmd, ScenarioSpec& s) {
    cmd->add_flag("--p2p", s.p2p, "Single src->dst transfer of --size-mb");
    cmd->add_flag("--skewed", s.skewed, "Skewed all-to-allv: --size-mb per rank, --ratio to --hot");
    cmd->add_flag("--stencil", s.stencil, "1-D stencil halo exchange of --size-mb per neighbor");
    cmd->add_flag("--aggregator", s.aggregator, "Every sender ships --size-mb to each of --dsts");
    cmd->add_flag("--irregular", s.irregular, "Seeded sparse matrix totaling --size-mb");
    cmd->add_option("--size-mb", s.size_mb, "Payload size in MiB (meaning depends on workload)")
        ->capture_default_str();
    cmd->add_option("--ratio", s.ratio, "Hotspot ratio for --skewed")->capture_default_str();
    cmd->add_option("--hot", s.hot, "Hot destination rank for --skewed")->capture_default_str();
    cmd->add_option("--src", s.src, "Source rank for --p2p")->capture_default_str();
    cmd->add_option("--dst", s.dst, "Destination rank for --p2p")->capture_default_str();
    cmd->add_option("--sparsity", s.sparsity, "Fill fraction for --irregular")
        ->capture_default_str();
    cmd->add_option("--dsts", s.dsts, "Destination ranks for --aggregator");
    cmd->add_option("--seed", s.seed, "Workload seed")->capture_default_str();
}

void add_model_options(CLI::App* cmd, ScenarioSpec& s) {
    cmd->add_option("--lambda", s.lambda, "Fraction of remaining demand routed per visit")
        ->capture_default_str();
    cmd->add_option("--chunk-mb", s.chunk_mb, "Planner chunk granularity in MiB")
        ->capture_default_str();
    cmd->add_option("--pi", s.pi, "Extra-hop penalty weight")->capture_default_str();
    cmd->add_option("--buffer-mb", s.buffer_mb, "P2P staging buffer per hop in MiB")
        ->capture_default_str();
    cmd->add_option("--pipe-chunk-kb", s.pipe_chunk_kb,
                    "Pipeline chunk in KiB (0 = fluid, no chunking)")
        ->capture_default_str();
    cmd->add_option("--hop-latency-us", s.hop_latency_us, "Per-hop latency on NvLink hops, us")
        ->capture_default_str();
    cmd->add_option("--nic-latency-us", s.nic_latency_us, "Per-hop latency on NIC/rail hops, us")
        ->capture_default_str();
    cmd->add_option("--channels", s.channels, "Parallel channels per peer")
        ->capture_default_str();
    cmd->add_option("--mode", s.mode, "Simulator mode: closed_form or event")
        ->capture_default_str();
    cmd->add_option("--baseline", s.baseline,
                    "Which plan the headline bandwidth uses: nimble or direct")
        ->capture_default_str();
    cmd->add_option("--out-dir", s.out_dir,
                    "Output directory (default $NIMBLE_OUT_DIR, else current directory)");
}

Fabric parse_fabric(const std::string& name) {
    if (name == "alltoall") return Fabric::AllToAllNvLink;
    if (name == "nvswitch") return Fabric::NvSwitch;
    throw UsageError("unknown fabric '" + name + "' (expected alltoall or nvswitch)");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("short write to " + path);
}

Topology make_topology(const ScenarioSpec& s) {
    if (!s.topo_file.empty()) return load_topology(slurp(s.topo_file));
    return build_canonical(s.nodes, s.gpus, s.nics, gbps(s.nvlink_gbps), gbps(s.rail_gbps),
                           parse_fabric(s.fabric));
}

int rank_count(const ScenarioSpec& s, const Topology& topo) {
    return s.ranks > 0 ? s.ranks : topo.nodes * topo.gpus_per_node;
}

std::uint64_t mib_bytes(double mb) {
    if (mb < 0) throw UsageError("sizes must be non-negative");
    return static_cast<std::uint64_t>(mb * static_cast<double>(MiB) + 0.5);
}

DemandMatrix make_demand(const ScenarioSpec& s, int ranks, std::uint64_t bytes, double ratio) {
    int chosen = s.p2p + s.skewed + s.stencil + s.aggregator + s.irregular;
    if (chosen != 1)
        throw UsageError("choose exactly one of --p2p --skewed --stencil --aggregator --irregular");
    if (s.p2p) return gen_p2p(ranks, s.src, s.dst, bytes);
    if (s.skewed) return gen_skewed_a2av(ranks, bytes, ratio, s.hot, s.seed);
    if (s.stencil) return gen_stencil_1d(ranks, bytes);
    if (s.aggregator) return gen_aggregator(ranks, s.dsts, bytes);
    return gen_irregular(ranks, bytes, s.sparsity, s.seed);
}

PlannerConfig planner_config(const ScenarioSpec& s) {
    PlannerConfig pc;
    pc.lambda = s.lambda;
    pc.epsilon = mib_bytes(s.chunk_mb);
    pc.cost.pi = s.pi;
    return pc;
}

PipelineConfig pipeline_config(const ScenarioSpec& s) {
    PipelineConfig cfg;
    cfg.p2p_buffer = mib_bytes(s.buffer_mb);
    cfg.pipe_chunk = static_cast<std::uint64_t>(s.pipe_chunk_kb * 1024.0 + 0.5);
    cfg.hop_latency = s.hop_latency_us * 1e-6;
    cfg.nic_hop_latency = s.nic_latency_us * 1e-6;
    cfg.channels_per_peer = s.channels;
    cfg.validate();
    return cfg;
}

std::string out_dir(const ScenarioSpec& s) {
    std::string dir = s.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("NIMBLE_OUT_DIR");
        dir = env && *env ? env : ".";
    }
    std::filesystem::create_directories(dir);
    return dir;
}

struct RunResult {
    ScenarioRow row;
    Plan nimble;
    Plan baseline;
};

RunResult run_one(const Topology& topo, const RankMap& map, const DemandMatrix& demand,
                  const ScenarioSpec& s, std::uint64_t size_bytes, double ratio) {
    RunResult r;
    r.nimble = plan(topo, map, demand, planner_config(s));
    r.baseline = plan_direct_baseline(topo, map, demand);
    PipelineConfig cfg = pipeline_config(s);
    SimMode mode = parse_sim_mode(s.mode);
    ExchangeResult rn = simulate_exchange(topo, r.nimble, cfg, mode);
    ExchangeResult rb = simulate_exchange(topo, r.baseline, cfg, mode);
    r.row.scenario = demand.label;
    r.row.size_bytes = size_bytes;
    r.row.ratio = s.skewed ? ratio : 0.0;
    r.row.baseline_completion_s = rb.completion;
    r.row.nimble_completion_s = rn.completion;
    r.row.speedup = speedup(rn, rb);
    r.row.bottleneck_link = rn.bottleneck_link >= 0 ? topo.link_name(rn.bottleneck_link) : "none";
    r.row.max_norm_load_baseline = max_normalized_load(topo, r.baseline);
    r.row.max_norm_load_nimble = max_normalized_load(topo, r.nimble);
    r.row.link_utilization_baseline = rb.link_utilization;
    r.row.link_utilization_nimble = rn.link_utilization;
    return r;
}

void write_reports(const std::string& dir, const Topology& topo,
                   const std::vector<ScenarioRow>& rows) {
    spill(dir + "/report.csv", report_csv(rows));
    spill(dir + "/report.json", report_json(topo, rows).dump(2) + "\n");
}

void print_summary(const ScenarioSpec& s, const DemandMatrix& demand, const ScenarioRow& row) {
    double completion =
        s.baseline == "direct" ? row.baseline_completion_s : row.nimble_completion_s;
    double bw = completion > 0.0 ? static_cast<double>(demand.total()) / completion / 1e9 : 0.0;
    std::printf("peak_bandwidth_gbps=%s speedup=%s\n", format_double(bw).c_str(),
                format_double(row.speedup).c_str());
}

int cmd_plan(const ScenarioSpec& s) {
    if (s.baseline != "nimble" && s.baseline != "direct")
        throw UsageError("--baseline must be nimble or direct");
    Topology topo = make_topology(s);
    RankMap map = make_rank_map(rank_count(s, topo), topo.gpus_per_node);
    std::uint64_t bytes = mib_bytes(s.size_mb);
    DemandMatrix demand = make_demand(s, map.ranks, bytes, s.ratio);
    RunResult r = run_one(topo, map, demand, s, bytes, s.ratio);

    std::string dir = out_dir(s);
    spill(dir + "/alltoall_payload_volume.txt", write_payload_matrix(demand));
    Plan exported = s.baseline == "direct" ? r.baseline : r.nimble;
    exported.stats.wall_seconds = 0; // keep exported plans byte-stable across runs
    spill(dir + "/plan.json", plan_to_json(exported).dump(2) + "\n");
    write_reports(dir, topo, {r.row});

    std::printf("plan: pairs=%zu visits=%llu placements=%llu refine_moves=%llu "
                "max_norm_load=%s\n",
                r.nimble.pairs.size(),
                static_cast<unsigned long long>(r.nimble.stats.pair_visits),
                static_cast<unsigned long long>(r.nimble.stats.placements),
                static_cast<unsigned long long>(r.nimble.stats.refine_moves),
                format_double(r.row.max_norm_load_nimble).c_str());
    std::printf("wrote %s/alltoall_payload_volume.txt %s/plan.json %s/report.csv %s/report.json\n",
                dir.c_str(), dir.c_str(), dir.c_str(), dir.c_str());
    print_summary(s, demand, r.row);
    return 0;
}

int cmd_simulate(const ScenarioSpec& s, const std::string& plan_path) {
    Topology topo = make_topology(s);
    RankMap map = make_rank_map(rank_count(s, topo), topo.gpus_per_node);
    std::uint64_t bytes = mib_bytes(s.size_mb);
    DemandMatrix demand = make_demand(s, map.ranks, bytes, s.ratio);

    Plan loaded = plan_from_json(topo, map, nlohmann::json::parse(slurp(plan_path)));
    Plan base = plan_direct_baseline(topo, map, demand);
    PipelineConfig cfg = pipeline_config(s);
    SimMode mode = parse_sim_mode(s.mode);
    ExchangeResult rn = simulate_exchange(topo, loaded, cfg, mode);
    ExchangeResult rb = simulate_exchange(topo, base, cfg, mode);

    ScenarioRow row;
    row.scenario = demand.label;
    row.size_bytes = bytes;
    row.ratio = s.skewed ? s.ratio : 0.0;
    row.baseline_completion_s = rb.completion;
    row.nimble_completion_s = rn.completion;
    row.speedup = speedup(rn, rb);
    row.bottleneck_link = rn.bottleneck_link >= 0 ? topo.link_name(rn.bottleneck_link) : "none";
    row.max_norm_load_baseline = max_normalized_load(topo, base);
    row.max_norm_load_nimble = max_normalized_load(topo, loaded);
    row.link_utilization_baseline = rb.link_utilization;
    row.link_utilization_nimble = rn.link_utilization;

    std::string dir = out_dir(s);
    spill(dir + "/alltoall_payload_volume.txt", write_payload_matrix(demand));
    write_reports(dir, topo, {row});
    std::printf("wrote %s/alltoall_payload_volume.txt %s/report.csv %s/report.json\n", dir.c_str(),
                dir.c_str(), dir.c_str());
    print_summary(s, demand, row);
    return 0;
}

int cmd_sweep(const ScenarioSpec& s, const std::vector<double>& sizes_mb,
              const std::vector<double>& ratios) {
    if (sizes_mb.empty() && ratios.empty())
        throw UsageError("sweep needs --sizes-mb and/or --ratios");
    std::vector<double> sizes = sizes_mb.empty() ? std::vector<double>{s.size_mb} : sizes_mb;
    std::vector<double> rats = ratios.empty() ? std::vector<double>{s.ratio} : ratios;

    Topology topo = make_topology(s);
    RankMap map = make_rank_map(rank_count(s, topo), topo.gpus_per_node);
    std::vector<ScenarioRow> rows;
    for (double mb : sizes)
        for (double ratio : rats) {
            std::uint64_t bytes = mib_bytes(mb);
            DemandMatrix demand = make_demand(s, map.ranks, bytes, ratio);
            RunResult r = run_one(topo, map, demand, s, bytes, ratio);
            std::printf("scenario=%s size_mb=%s ratio=%s speedup=%s\n", demand.label.c_str(),
                        format_double(mb).c_str(), format_double(ratio).c_str(),
                        format_double(r.row.speedup).c_str());
            rows.push_back(std::move(r.row));
        }
    std::string dir = out_dir(s);
    write_reports(dir, topo, rows);
    std::printf("wrote %s/report.csv %s/report.json (%zu rows)\n", dir.c_str(), dir.c_str(),
                rows.size());
    return 0;
}

int cmd_oracle(const std::string& instance_path) {
    nlohmann::json j = nlohmann::json::parse(slurp(instance_path));
    const auto& tj = j.at("topology");
    Topology topo = build_canonical(
        tj.at("nodes").get<int>(), tj.at("gpus_per_node").get<int>(),
        tj.value("nics_per_node", 0), gbps(tj.value("nvlink_gbps", 120.0)),
        gbps(tj.value("rail_gbps", 50.0)), parse_fabric(tj.value("fabric", "alltoall")));
    int rpn = j.value("ranks_per_node", topo.gpus_per_node);
    RankMap map = make_rank_map(topo.nodes * rpn, rpn);

    ExactInstance inst;
    inst.epsilon = mib_bytes(j.value("epsilon_mb", 4.0));
    for (const auto& dj : j.at("demands"))
        inst.demands.push_back({dj.at("src").get<int>(), dj.at("dst").get<int>(),
                                dj.at("chunks").get<int>()});

    ExactResult res = solve_exact(topo, map, inst);
    std::printf("Z_star=%s\n", format_double(res.z_star).c_str());
    std::printf("explored=%llu\n", static_cast<unsigned long long>(res.explored));
    for (size_t d = 0; d < inst.demands.size(); ++d) {
        const ExactDemand& dem = inst.demands[d];
        auto cands = enumerate_paths(topo, map, dem.src, dem.dst);
        std::printf("demand %zu: %d->%d chunks=%d ", d, dem.src, dem.dst, dem.chunks);
        for (size_t c = 0; c < cands.size(); ++c) {
            if (res.best[d][c] == 0) continue;
            std::string label = "direct";
            if (cands[c].cls == PathClass::IntraTwoHop)
                label = "via_g" + std::to_string(cands[c].via);
            else if (cands[c].cls == PathClass::InterRail && !cands[c].pair_direct)
                label = "rail" + std::to_string(cands[c].rail);
            std::printf(" %s=%d", label.c_str(), res.best[d][c]);
        }
        std::printf("\n");
    }
    return 0;
}

int cmd_bench(const ScenarioSpec& s, int warmup, int runs) {
    if (runs <= 0) throw UsageError("--runs must be positive");
    ScenarioSpec spec = s;
    if (spec.p2p + spec.skewed + spec.stencil + spec.aggregator + spec.irregular == 0)
        spec.skewed = true;
    Topology topo = make_topology(spec);
    RankMap map = make_rank_map(rank_count(spec, topo), topo.gpus_per_node);
    DemandMatrix demand = make_demand(spec, map.ranks, mib_bytes(spec.size_mb), spec.ratio);
    PlannerConfig pc = planner_config(spec);

    for (int i = 0; i < warmup; ++i) plan(topo, map, demand, pc);
    std::vector<double> ms;
    ms.reserve(static_cast<size_t>(runs));
    for (int i = 0; i < runs; ++i) ms.push_back(plan(topo, map, demand, pc).stats.wall_seconds * 1e3);
    std::sort(ms.begin(), ms.end());
    std::printf("plan_time_ms min=%.4f median=%.4f max=%.4f (%d runs, %d warmup)\n", ms.front(),
                ms[ms.size() / 2], ms.back(), runs, warmup);
    return 0;
}

int cmd_topo(const ScenarioSpec& s, const std::string& check_path, const std::string& out_path) {
    if (!check_path.empty()) {
        Topology topo = load_topology(slurp(check_path));
        topo.validate();
        std::printf("topology ok: nodes=%d gpus=%d nics=%d fabric=%s links=%d\n", topo.nodes,
                    topo.gpus_per_node, topo.nics_per_node,
                    topo.fabric == Fabric::NvSwitch ? "nvswitch" : "alltoall", topo.link_count());
        return 0;
    }
    Topology topo = make_topology(s);
    std::string text = save_topology(topo);
    if (out_path.empty())
        std::fputs(text.c_str(), stdout);
    else {
        spill(out_path, text);
        std::printf("wrote %s (%d links)\n", out_path.c_str(), topo.link_count());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Endpoint-driven multi-path planner and fabric simulator"};
    app.require_subcommand(1);

    ScenarioSpec s;
    bool compare_baseline = false;

    CLI::App* c_plan = app.add_subcommand("plan", "Plan a workload, simulate it, emit reports");
    add_topology_options(c_plan, s);
    add_workload_options(c_plan, s);
    add_model_options(c_plan, s);
    c_plan->add_flag("--compare-baseline", compare_baseline,
                     "Also report the direct baseline (always on; kept for script parity)");

    std::string plan_path;
    CLI::App* c_sim = app.add_subcommand("simulate", "Simulate a previously exported plan");
    add_topology_options(c_sim, s);
    add_workload_options(c_sim, s);
    add_model_options(c_sim, s);
    c_sim->add_option("--plan", plan_path, "plan.json produced by the plan subcommand")
        ->required();

    std::vector<double> sizes_mb, ratios;
    CLI::App* c_sweep = app.add_subcommand("sweep", "Run a size/ratio grid, one report row each");
    add_topology_options(c_sweep, s);
    add_workload_options(c_sweep, s);
    add_model_options(c_sweep, s);
    c_sweep->add_option("--sizes-mb", sizes_mb, "Sizes to sweep, MiB");
    c_sweep->add_option("--ratios", ratios, "Hotspot ratios to sweep");

    std::string instance_path;
    CLI::App* c_oracle =
        app.add_subcommand("oracle", "Solve a small instance exactly, print Z_star");
    c_oracle->add_option("--instance", instance_path, "Instance description (JSON)")->required();

    int warmup = 5, runs = 100;
    CLI::App* c_bench = app.add_subcommand("bench", "Measure planner wall time");
    add_topology_options(c_bench, s);
    add_workload_options(c_bench, s);
    add_model_options(c_bench, s);
    c_bench->add_option("--warmup", warmup, "Warmup runs")->capture_default_str();
    c_bench->add_option("--runs", runs, "Timed runs")->capture_default_str();

    std::string check_path, out_path;
    CLI::App* c_topo = app.add_subcommand("topo", "Emit or validate a topology file");
    add_topology_options(c_topo, s);
    c_topo->add_option("--check", check_path, "Load and validate this topology file");
    c_topo->add_option("--out", out_path, "Write the topology here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_plan) return cmd_plan(s);
        if (*c_sim) return cmd_simulate(s, plan_path);
        if (*c_sweep) return cmd_sweep(s, sizes_mb, ratios);
        if (*c_oracle) return cmd_oracle(instance_path);
        if (*c_bench) return cmd_bench(s, warmup, runs);
        if (*c_topo) return cmd_topo(s, check_path, out_path);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
