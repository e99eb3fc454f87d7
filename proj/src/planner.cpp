#include "nimble/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nimble {

double CostModel::hop_penalty(const CandidatePath& path, std::uint64_t message_bytes) const {
    if (path.hops <= 1) return 0.0;
    if (message_bytes <= small_message_cutoff) return std::numeric_limits<double>::infinity();
    std::uint64_t sat = path.cls == PathClass::InterRail ? saturation_inter : saturation_intra;
    double fade = 1.0 - static_cast<double>(message_bytes) / static_cast<double>(sat);
    if (fade <= 0.0) return 0.0;
    return pi * static_cast<double>(path.hops - 1) * fade;
}

CostModel CostModel::unpenalized() {
    CostModel c;
    c.pi = 0.0;
    c.small_message_cutoff = 0;
    return c;
}

static void append_intra_edges(const Topology& topo, int node, int from, int to,
                               std::vector<int>& edges) {
    if (from == to) return;
    if (topo.fabric == Fabric::AllToAllNvLink) {
        edges.push_back(topo.nvlink_id(node, from, to));
    } else {
        edges.push_back(topo.port_up_id(node, from));
        edges.push_back(topo.port_down_id(node, to));
    }
}

std::vector<CandidatePath> enumerate_paths(const Topology& topo, const RankMap& map,
                                           int src_rank, int dst_rank) {
    if (src_rank < 0 || src_rank >= map.ranks || dst_rank < 0 || dst_rank >= map.ranks)
        throw std::runtime_error("enumerate_paths: rank out of range");
    if (src_rank == dst_rank) throw std::runtime_error("enumerate_paths: src equals dst");
    int sn = map.node_of(src_rank), so = map.ordinal_of(src_rank);
    int dn = map.node_of(dst_rank), dd = map.ordinal_of(dst_rank);
    if (sn >= topo.nodes || dn >= topo.nodes || so >= topo.gpus_per_node || dd >= topo.gpus_per_node)
        throw std::runtime_error("enumerate_paths: rank map exceeds topology");

    std::vector<CandidatePath> out;
    auto stamp = [&](CandidatePath& p) {
        p.src_rank = src_rank;
        p.dst_rank = dst_rank;
    };

    if (sn == dn) {
        CandidatePath direct;
        direct.cls = PathClass::Direct;
        direct.pair_direct = true;
        direct.hops = 1;
        append_intra_edges(topo, sn, so, dd, direct.edges);
        stamp(direct);
        out.push_back(std::move(direct));
        if (topo.fabric == Fabric::AllToAllNvLink) {
            for (int v = 0; v < topo.gpus_per_node; ++v) {
                if (v == so || v == dd) continue;
                CandidatePath p;
                p.cls = PathClass::IntraTwoHop;
                p.via = v;
                p.hops = 2;
                p.edges = {topo.nvlink_id(sn, so, v), topo.nvlink_id(sn, v, dd)};
                stamp(p);
                out.push_back(std::move(p));
            }
        }
        return out;
    }

    if (topo.nics_per_node == 0)
        throw std::runtime_error("enumerate_paths: no rails between nodes");

    auto make_rail = [&](int r) {
        CandidatePath p;
        p.cls = PathClass::InterRail;
        p.rail = r;
        p.hops = 1 + (so != r ? 1 : 0) + (dd != r ? 1 : 0);
        append_intra_edges(topo, sn, so, r, p.edges);
        p.edges.push_back(topo.attach_up_id(sn, r));
        p.edges.push_back(topo.rail_id(sn, dn, r));
        p.edges.push_back(topo.attach_down_id(dn, r));
        append_intra_edges(topo, dn, r, dd, p.edges);
        stamp(p);
        return p;
    };

    // The destination's own rail is the designated direct route: the receiver
    // pulls straight off its attached NIC, so it counts as one hop even when
    // the sender crosses an intra-node link first.
    int direct_rail = dd % topo.nics_per_node;
    CandidatePath direct = make_rail(direct_rail);
    direct.pair_direct = true;
    direct.hops = 1;
    out.push_back(std::move(direct));
    for (int r = 0; r < topo.nics_per_node; ++r) {
        if (r == direct_rail) continue;
        out.push_back(make_rail(r));
    }
    return out;
}

double path_cost(const CandidatePath& path, const std::vector<double>& link_loads,
                 const Topology& topo, const CostModel& cost,
                 std::uint64_t message_bytes, double pending) {
    double worst = 0.0;
    for (int e : path.edges) {
        double c = cost.edge_cost(link_loads[static_cast<size_t>(e)] + pending,
                                  topo.links[static_cast<size_t>(e)].capacity);
        worst = std::max(worst, c);
    }
    return worst + cost.hop_penalty(path, message_bytes);
}

// The sweep commits chunks in pair order, so an early pair can crowd a link
// that a later pair has no way around. Three bounded chunk-move passes clean
// that up afterwards: the first shifts chunks off the most loaded links when a
// sibling route strictly lowers the bottleneck, the second walks multi-hop
// chunks back onto the pair's direct route whenever that stays strictly under
// the bottleneck, and the third handles the two-step traps the first cannot
// see: a bottleneck chunk whose only relieving sibling is blocked by one chunk
// of another pair that itself has somewhere else to go. None of the passes
// ever raises a pair's hop penalty, so small messages stay put.
static std::uint64_t refine_plan(const Topology& topo, const std::vector<PairPlan>& pairs,
                                 std::vector<std::vector<double>>& acc,
                                 std::vector<double>& loads, const PlannerConfig& config) {
    constexpr std::uint64_t kMoveCap = 4096;
    constexpr int kEjectTries = 4096;
    const double eps = static_cast<double>(config.epsilon);
    std::uint64_t moves = 0;
    int eject_tries = 0;

    auto norm = [&](int e) {
        return loads[static_cast<size_t>(e)] / topo.links[static_cast<size_t>(e)].capacity;
    };
    auto global_max = [&] {
        double worst = 0.0;
        for (size_t e = 0; e < loads.size(); ++e)
            worst = std::max(worst, loads[e] / topo.links[e].capacity);
        return worst;
    };
    auto shift = [&](size_t i, size_t from, size_t to, double q) {
        for (int e : pairs[i].candidates[from].edges) loads[static_cast<size_t>(e)] -= q;
        for (int e : pairs[i].candidates[to].edges) loads[static_cast<size_t>(e)] += q;
        acc[i][from] -= q;
        acc[i][to] += q;
    };
    auto penalty = [&](size_t i, size_t c) {
        return config.cost.hop_penalty(pairs[i].candidates[c], pairs[i].demand);
    };

    auto pass_reduce = [&]() -> bool {
        bool any = false;
        bool progress = true;
        while (progress && moves < kMoveCap) {
            progress = false;
            double cur = global_max();
            if (cur <= 0.0) break;
            const double bar = cur * (1.0 - 1e-12);
            for (size_t i = 0; i < pairs.size() && !progress; ++i) {
                const auto& cands = pairs[i].candidates;
                for (size_t c = 0; c < cands.size() && !progress; ++c) {
                    if (acc[i][c] <= 0.0) continue;
                    bool on_max = false;
                    for (int e : cands[c].edges)
                        if (norm(e) >= bar) {
                            on_max = true;
                            break;
                        }
                    if (!on_max) continue;
                    double q = std::min(eps, acc[i][c]);
                    double pen = penalty(i, c);
                    for (size_t a = 0; a < cands.size(); ++a) {
                        if (a == c || penalty(i, a) > pen) continue;
                        shift(i, c, a, q);
                        if (global_max() < bar) {
                            ++moves;
                            progress = true;
                            any = true;
                            break;
                        }
                        shift(i, a, c, q);
                    }
                }
            }
        }
        return any;
    };

    auto pass_consolidate = [&]() -> bool {
        bool any = false;
        bool progress = true;
        while (progress && moves < kMoveCap) {
            progress = false;
            double cur = global_max();
            double bar = cur * (1.0 - 1e-12);
            for (size_t i = 0; i < pairs.size(); ++i) {
                const auto& cands = pairs[i].candidates;
                for (size_t c = 1; c < cands.size(); ++c) {
                    while (acc[i][c] > 0.0 && moves < kMoveCap) {
                        double q = std::min(eps, acc[i][c]);
                        shift(i, c, 0, q);
                        bool ok = true;
                        for (int e : cands[0].edges)
                            if (norm(e) >= bar) {
                                ok = false;
                                break;
                            }
                        if (!ok) {
                            shift(i, 0, c, q);
                            break;
                        }
                        ++moves;
                        progress = true;
                        any = true;
                        double nm = global_max();
                        if (nm < cur) {
                            cur = nm;
                            bar = cur * (1.0 - 1e-12);
                        }
                    }
                }
            }
        }
        return any;
    };

    auto pass_eject = [&]() -> bool {
        if (moves + 2 > kMoveCap) return false;
        double cur = global_max();
        if (cur <= 0.0) return false;
        const double bar = cur * (1.0 - 1e-12);
        for (size_t i = 0; i < pairs.size(); ++i) {
            const auto& cands = pairs[i].candidates;
            for (size_t c = 0; c < cands.size(); ++c) {
                if (acc[i][c] <= 0.0) continue;
                bool on_max = false;
                for (int e : cands[c].edges)
                    if (norm(e) >= bar) {
                        on_max = true;
                        break;
                    }
                if (!on_max) continue;
                double q = std::min(eps, acc[i][c]);
                double pen = penalty(i, c);
                for (size_t a = 0; a < cands.size(); ++a) {
                    if (a == c || penalty(i, a) > pen) continue;
                    shift(i, c, a, q);
                    for (int be : cands[a].edges) {
                        if (norm(be) < bar) continue;
                        for (size_t j = 0; j < pairs.size(); ++j) {
                            const auto& jc = pairs[j].candidates;
                            for (size_t d = 0; d < jc.size(); ++d) {
                                if (j == i && (d == a || d == c)) continue;
                                if (acc[j][d] <= 0.0) continue;
                                bool carries = false;
                                for (int e : jc[d].edges)
                                    if (e == be) {
                                        carries = true;
                                        break;
                                    }
                                if (!carries) continue;
                                double v = std::min(eps, acc[j][d]);
                                double jpen = penalty(j, d);
                                for (size_t b = 0; b < jc.size(); ++b) {
                                    if (b == d || penalty(j, b) > jpen) continue;
                                    if (eject_tries >= kEjectTries) break;
                                    ++eject_tries;
                                    shift(j, d, b, v);
                                    if (global_max() < bar) {
                                        moves += 2;
                                        return true;
                                    }
                                    shift(j, b, d, v);
                                }
                            }
                        }
                    }
                    shift(i, a, c, q);
                    if (eject_tries >= kEjectTries) return false;
                }
            }
        }
        return false;
    };

    for (int round = 0; round < 8; ++round) {
        bool reduced = pass_reduce();
        bool consolidated = pass_consolidate();
        if (!reduced && !consolidated && !pass_eject()) break;
    }
    return moves;
}

static std::vector<PairPlan> make_pair_plans(const Topology& topo, const RankMap& map,
                                             const DemandMatrix& demand) {
    demand.validate();
    std::vector<PairPlan> pairs;
    for (int s = 0; s < demand.ranks; ++s)
        for (int d = 0; d < demand.ranks; ++d) {
            std::uint64_t m = demand.at(s, d);
            if (m == 0) continue;
            PairPlan pp;
            pp.src = s;
            pp.dst = d;
            pp.demand = m;
            pp.candidates = enumerate_paths(topo, map, s, d);
            pairs.push_back(std::move(pp));
        }
    return pairs;
}

Plan plan(const Topology& topo, const RankMap& map, const DemandMatrix& demand,
          const PlannerConfig& config) {
    if (!(config.lambda > 0.0 && config.lambda <= 1.0))
        throw std::runtime_error("planner: lambda must be in (0,1]");
    if (config.epsilon == 0) throw std::runtime_error("planner: epsilon must be positive");
    auto t0 = std::chrono::steady_clock::now();

    Plan result;
    result.epsilon = config.epsilon;
    result.pairs = make_pair_plans(topo, map, demand);

    std::vector<double> loads(topo.links.size(), 0.0);
    std::vector<std::vector<double>> acc(result.pairs.size());
    std::vector<double> remaining(result.pairs.size());
    std::vector<size_t> active(result.pairs.size());
    for (size_t i = 0; i < result.pairs.size(); ++i) {
        acc[i].assign(result.pairs[i].candidates.size(), 0.0);
        remaining[i] = static_cast<double>(result.pairs[i].demand);
        active[i] = i;
    }

    const double eps = static_cast<double>(config.epsilon);
    bool out_of_visits = false;
    while (!active.empty() && !out_of_visits) {
        std::vector<size_t> still;
        for (size_t i : active) {
            if (result.stats.pair_visits >= config.max_pair_visits) {
                out_of_visits = true;
                still.push_back(i);
                continue;
            }
            ++result.stats.pair_visits;
            PairPlan& pp = result.pairs[i];
            double r = remaining[i];
            double budget =
                r < eps ? r : std::max(eps, std::floor(r * config.lambda / eps) * eps);
            while (budget > 0.0) {
                double chunk = std::min(eps, budget);
                int best = 0;
                double best_cost = std::numeric_limits<double>::infinity();
                for (size_t c = 0; c < pp.candidates.size(); ++c) {
                    double pc =
                        path_cost(pp.candidates[c], loads, topo, config.cost, pp.demand, chunk);
                    if (pc < best_cost) {
                        best_cost = pc;
                        best = static_cast<int>(c);
                    }
                }
                for (int e : pp.candidates[static_cast<size_t>(best)].edges)
                    loads[static_cast<size_t>(e)] += chunk;
                acc[i][static_cast<size_t>(best)] += chunk;
                ++result.stats.placements;
                if (chunk < eps) ++result.stats.residual_flows;
                budget -= chunk;
                r -= chunk;
            }
            remaining[i] = r;
            if (r > 0.0) still.push_back(i);
        }
        active = std::move(still);
    }

    // Visit budget exhausted: dump whatever is left onto each pair's direct
    // route so the plan still covers every byte.
    if (out_of_visits) {
        for (size_t i : active) {
            acc[i][0] += remaining[i];
            for (int e : result.pairs[i].candidates[0].edges)
                loads[static_cast<size_t>(e)] += remaining[i];
            ++result.stats.fallback_pairs;
        }
    }

    result.stats.refine_moves = refine_plan(topo, result.pairs, acc, loads, config);

    // On very small fabrics every detour overlaps another pair's only route, and
    // the sweep can end up balanced at a higher bottleneck than no spreading at
    // all, with no single-chunk move leading back down. If the plain direct
    // layout beats what we have, restart the refinement from that layout; it
    // only ever accepts improving moves, so the result never loses to direct.
    {
        std::vector<double> direct_loads(topo.links.size(), 0.0);
        for (const PairPlan& pp : result.pairs)
            for (int e : pp.candidates[0].edges)
                direct_loads[static_cast<size_t>(e)] += static_cast<double>(pp.demand);
        auto peak = [&](const std::vector<double>& l) {
            double worst = 0.0;
            for (size_t e = 0; e < l.size(); ++e)
                worst = std::max(worst, l[e] / topo.links[e].capacity);
            return worst;
        };
        if (peak(loads) > peak(direct_loads) * (1.0 + 1e-12)) {
            for (size_t i = 0; i < result.pairs.size(); ++i) {
                acc[i].assign(result.pairs[i].candidates.size(), 0.0);
                acc[i][0] = static_cast<double>(result.pairs[i].demand);
            }
            loads = direct_loads;
            result.stats.refine_moves += refine_plan(topo, result.pairs, acc, loads, config);
        }
    }

    for (size_t i = 0; i < result.pairs.size(); ++i)
        for (size_t c = 0; c < acc[i].size(); ++c)
            if (acc[i][c] > 0.0)
                result.pairs[i].flows.push_back({static_cast<int>(c), acc[i][c]});

    result.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Plan plan_direct_baseline(const Topology& topo, const RankMap& map,
                          const DemandMatrix& demand) {
    Plan result;
    result.pairs = make_pair_plans(topo, map, demand);
    for (PairPlan& pp : result.pairs)
        pp.flows.push_back({0, static_cast<double>(pp.demand)});
    return result;
}

std::vector<double> plan_link_loads(const Topology& topo, const Plan& plan) {
    std::vector<double> loads(topo.links.size(), 0.0);
    for (const PairPlan& pp : plan.pairs)
        for (const FlowAssignment& f : pp.flows)
            for (int e : pp.candidates[static_cast<size_t>(f.candidate)].edges)
                loads[static_cast<size_t>(e)] += f.bytes;
    return loads;
}

double max_normalized_load(const Topology& topo, const Plan& plan) {
    std::vector<double> loads = plan_link_loads(topo, plan);
    double worst = 0.0;
    for (size_t e = 0; e < loads.size(); ++e)
        worst = std::max(worst, loads[e] / topo.links[e].capacity);
    return worst;
}

static const char* class_name(PathClass cls) {
    switch (cls) {
    case PathClass::Direct: return "direct";
    case PathClass::IntraTwoHop: return "intra_two_hop";
    case PathClass::InterRail: return "inter_rail";
    }
    return "?";
}

nlohmann::ordered_json plan_to_json(const Plan& plan) {
    nlohmann::ordered_json j;
    j["epsilon"] = plan.epsilon;
    j["stats"] = {{"pair_visits", plan.stats.pair_visits},
                  {"placements", plan.stats.placements},
                  {"fallback_pairs", plan.stats.fallback_pairs},
                  {"residual_flows", plan.stats.residual_flows},
                  {"refine_moves", plan.stats.refine_moves},
                  {"wall_seconds", plan.stats.wall_seconds}};
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const PairPlan& pp : plan.pairs) {
        nlohmann::ordered_json flows = nlohmann::ordered_json::array();
        for (const FlowAssignment& f : pp.flows) {
            const CandidatePath& p = pp.candidates[static_cast<size_t>(f.candidate)];
            flows.push_back({{"class", class_name(p.cls)},
                             {"via", p.via},
                             {"rail", p.rail},
                             {"bytes", f.bytes}});
        }
        pairs.push_back({{"src", pp.src},
                         {"dst", pp.dst},
                         {"demand", pp.demand},
                         {"flows", std::move(flows)}});
    }
    j["pairs"] = std::move(pairs);
    return j;
}

Plan plan_from_json(const Topology& topo, const RankMap& map, const nlohmann::json& j) {
    Plan plan;
    plan.epsilon = j.value("epsilon", std::uint64_t{4 * MiB});
    if (j.contains("stats")) {
        const auto& s = j.at("stats");
        plan.stats.pair_visits = s.value("pair_visits", std::uint64_t{0});
        plan.stats.placements = s.value("placements", std::uint64_t{0});
        plan.stats.fallback_pairs = s.value("fallback_pairs", std::uint64_t{0});
        plan.stats.residual_flows = s.value("residual_flows", std::uint64_t{0});
        plan.stats.refine_moves = s.value("refine_moves", std::uint64_t{0});
        plan.stats.wall_seconds = s.value("wall_seconds", 0.0);
    }
    for (const auto& pj : j.at("pairs")) {
        PairPlan pp;
        pp.src = pj.at("src").get<int>();
        pp.dst = pj.at("dst").get<int>();
        pp.demand = pj.at("demand").get<std::uint64_t>();
        pp.candidates = enumerate_paths(topo, map, pp.src, pp.dst);
        double placed = 0.0;
        for (const auto& fj : pj.at("flows")) {
            std::string cls = fj.at("class").get<std::string>();
            int via = fj.at("via").get<int>();
            int rail = fj.at("rail").get<int>();
            int found = -1;
            for (size_t c = 0; c < pp.candidates.size(); ++c) {
                const CandidatePath& p = pp.candidates[c];
                if (cls == class_name(p.cls) && via == p.via && rail == p.rail) {
                    found = static_cast<int>(c);
                    break;
                }
            }
            if (found < 0)
                throw std::runtime_error("plan: flow references a route the topology lacks (pair " +
                                         std::to_string(pp.src) + "->" + std::to_string(pp.dst) +
                                         ", class " + cls + ")");
            double bytes = fj.at("bytes").get<double>();
            pp.flows.push_back({found, bytes});
            placed += bytes;
        }
        if (std::abs(placed - static_cast<double>(pp.demand)) > 0.5)
            throw std::runtime_error("plan: flows for pair " + std::to_string(pp.src) + "->" +
                                     std::to_string(pp.dst) + " do not sum to the demand");
        plan.pairs.push_back(std::move(pp));
    }
    return plan;
}

static std::string format_bytes_d(double b) {
    if (b >= 0 && std::floor(b) == b && b < 9.007199254740992e15)
        return std::to_string(static_cast<std::uint64_t>(b));
    return format_double(b);
}

std::string plan_to_text(const Topology& topo, const Plan& plan) {
    std::string out = "plan: pairs=" + std::to_string(plan.pairs.size()) +
                      " placements=" + std::to_string(plan.stats.placements) +
                      " visits=" + std::to_string(plan.stats.pair_visits) +
                      " max_norm_load=" + format_double(max_normalized_load(topo, plan)) + "\n";
    for (const PairPlan& pp : plan.pairs) {
        out += "pair " + std::to_string(pp.src) + " -> " + std::to_string(pp.dst) + "  demand " +
               std::to_string(pp.demand) + "\n";
        for (const FlowAssignment& f : pp.flows) {
            const CandidatePath& p = pp.candidates[static_cast<size_t>(f.candidate)];
            std::string label;
            switch (p.cls) {
            case PathClass::Direct: label = "direct"; break;
            case PathClass::IntraTwoHop: label = "via g" + std::to_string(p.via); break;
            case PathClass::InterRail:
                label = "rail " + std::to_string(p.rail);
                if (p.pair_direct) label += " (direct)";
                break;
            }
            out += "  " + label;
            out.append(label.size() < 18 ? 18 - label.size() : 1, ' ');
            out += format_bytes_d(f.bytes) + "\n";
        }
    }
    return out;
}

} // namespace nimble
