#include "nimble/oracle.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace nimble {

namespace {

struct Search {
    const Topology& topo;
    double eps;
    std::vector<std::vector<CandidatePath>> cands;
    std::vector<int> chunks;
    std::vector<double> loads;
    std::vector<std::vector<int>> current, best;
    double best_z = std::numeric_limits<double>::infinity();
    std::uint64_t explored = 0;

    Search(const Topology& t, double e) : topo(t), eps(e), loads(t.links.size(), 0.0) {}

    void demand(size_t d, double cur_max) {
        if (d == cands.size()) {
            if (cur_max < best_z) {
                best_z = cur_max;
                best = current;
            }
            return;
        }
        split(d, 0, chunks[d], cur_max);
    }

    // Assign `left` chunks among candidates of demand d from index ci on,
    // trying direct-heavy splits first so good incumbents arrive early.
    void split(size_t d, size_t ci, int left, double cur_max) {
        if (ci + 1 == cands[d].size()) {
            try_assign(d, ci, left, cur_max,
                       [&](double m) { demand(d + 1, m); });
            return;
        }
        for (int k = left; k >= 0; --k)
            try_assign(d, ci, k, cur_max,
                       [&](double m) { split(d, ci + 1, left - k, m); });
    }

    template <typename Next>
    void try_assign(size_t d, size_t ci, int k, double cur_max, Next next) {
        ++explored;
        const auto& edges = cands[d][ci].edges;
        double add = k * eps;
        double new_max = cur_max;
        for (int e : edges) {
            loads[static_cast<size_t>(e)] += add;
            new_max = std::max(new_max, loads[static_cast<size_t>(e)] /
                                            topo.links[static_cast<size_t>(e)].capacity);
        }
        current[d][ci] = k;
        if (new_max < best_z) next(new_max);
        current[d][ci] = 0;
        for (int e : edges) loads[static_cast<size_t>(e)] -= add;
    }
};

} // namespace

ExactResult solve_exact(const Topology& topo, const RankMap& map, const ExactInstance& inst) {
    if (inst.epsilon == 0) throw std::runtime_error("exact solver: epsilon must be positive");
    int total = 0;
    for (const ExactDemand& d : inst.demands) {
        if (d.chunks < 0) throw std::runtime_error("exact solver: negative chunk count");
        total += d.chunks;
    }
    if (total > kExactChunkCap)
        throw std::runtime_error("exact solver: instance has " + std::to_string(total) +
                                 " chunks, cap is " + std::to_string(kExactChunkCap));

    Search s(topo, static_cast<double>(inst.epsilon));
    for (const ExactDemand& d : inst.demands) {
        s.cands.push_back(enumerate_paths(topo, map, d.src, d.dst));
        s.chunks.push_back(d.chunks);
        s.current.emplace_back(s.cands.back().size(), 0);
    }
    s.demand(0, 0.0);

    ExactResult r;
    r.z_star = s.best_z;
    r.explored = s.explored;
    r.best = std::move(s.best);
    return r;
}

double approximation_gap(double plan_max_norm_load, double z_star) {
    if (z_star > 0.0) return plan_max_norm_load / z_star;
    return plan_max_norm_load > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

DemandMatrix exact_instance_demand(const ExactInstance& inst, int ranks) {
    DemandMatrix m;
    m.ranks = ranks;
    m.bytes.assign(static_cast<size_t>(ranks) * ranks, 0);
    m.chunk = inst.epsilon;
    m.label = "exact_instance";
    for (const ExactDemand& d : inst.demands) {
        if (d.src < 0 || d.src >= ranks || d.dst < 0 || d.dst >= ranks)
            throw std::runtime_error("exact instance: rank out of range");
        m.at(d.src, d.dst) += static_cast<std::uint64_t>(d.chunks) * inst.epsilon;
    }
    m.validate();
    return m;
}

} // namespace nimble
