#include "nimble/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace nimble {

namespace {

struct SimFlow {
    size_t pair = 0;
    double bytes = 0.0;
    double fill = 0.0;
    const std::vector<int>* edges = nullptr;
    std::vector<HopSpec> chain;
    double completion = 0.0;
};

std::vector<SimFlow> collect_flows(const Topology& topo, const Plan& plan,
                                   const PipelineConfig& cfg) {
    std::vector<SimFlow> flows;
    for (size_t p = 0; p < plan.pairs.size(); ++p) {
        const PairPlan& pp = plan.pairs[p];
        for (const FlowAssignment& f : pp.flows) {
            if (f.bytes < 0.0) throw std::runtime_error("exchange: negative flow bytes");
            if (f.bytes == 0.0) continue;
            if (f.candidate < 0 || static_cast<size_t>(f.candidate) >= pp.candidates.size())
                throw std::runtime_error("exchange: flow references missing candidate");
            SimFlow sf;
            sf.pair = p;
            sf.bytes = f.bytes;
            sf.edges = &pp.candidates[static_cast<size_t>(f.candidate)].edges;
            sf.chain = hop_chain(topo, pp.candidates[static_cast<size_t>(f.candidate)], cfg);
            sf.fill = pipeline_fill_overhead(sf.chain, cfg);
            flows.push_back(std::move(sf));
        }
    }
    return flows;
}

// Max-min fair rates: repeatedly find the link whose remaining capacity split
// over its still-unfixed flows is smallest, and fix those flows there.
std::vector<double> maxmin_rates(const Topology& topo, const std::vector<SimFlow>& flows,
                                 const std::vector<char>& active) {
    size_t F = flows.size();
    std::vector<double> rate(F, 0.0);
    std::vector<char> fixed(F, 0);
    std::vector<double> consumed(topo.links.size(), 0.0);
    std::vector<int> unfixed_on(topo.links.size(), 0);
    size_t left = 0;
    for (size_t f = 0; f < F; ++f) {
        if (!active[f]) {
            fixed[f] = 1;
            continue;
        }
        ++left;
        for (int e : *flows[f].edges) ++unfixed_on[static_cast<size_t>(e)];
    }
    while (left > 0) {
        int bottleneck = -1;
        double share = std::numeric_limits<double>::infinity();
        for (size_t e = 0; e < topo.links.size(); ++e) {
            if (unfixed_on[e] == 0) continue;
            double s = (topo.links[e].capacity - consumed[e]) / unfixed_on[e];
            if (s < share) {
                share = s;
                bottleneck = static_cast<int>(e);
            }
        }
        if (bottleneck < 0) throw std::runtime_error("exchange: flow without links");
        share = std::max(share, 0.0);
        for (size_t f = 0; f < F; ++f) {
            if (fixed[f]) continue;
            bool on = false;
            for (int e : *flows[f].edges)
                if (e == bottleneck) {
                    on = true;
                    break;
                }
            if (!on) continue;
            fixed[f] = 1;
            --left;
            rate[f] = share;
            for (int e : *flows[f].edges) {
                consumed[static_cast<size_t>(e)] += share;
                --unfixed_on[static_cast<size_t>(e)];
            }
        }
    }
    return rate;
}

void run_closed_form(const Topology& topo, std::vector<SimFlow>& flows) {
    size_t F = flows.size();
    std::vector<char> active(F, 1);
    std::vector<double> remaining(F);
    size_t live = F;
    for (size_t f = 0; f < F; ++f) remaining[f] = flows[f].bytes;
    double t = 0.0;
    while (live > 0) {
        std::vector<double> rate = maxmin_rates(topo, flows, active);
        double dt = std::numeric_limits<double>::infinity();
        for (size_t f = 0; f < F; ++f)
            if (active[f]) dt = std::min(dt, remaining[f] / rate[f]);
        if (!(dt >= 0.0) || !std::isfinite(dt))
            throw std::runtime_error("exchange: stalled fluid allocation");
        t += dt;
        for (size_t f = 0; f < F; ++f) {
            if (!active[f]) continue;
            remaining[f] -= rate[f] * dt;
            if (remaining[f] <= flows[f].bytes * 1e-12) {
                active[f] = 0;
                --live;
                flows[f].completion = flows[f].fill + t;
            }
        }
    }
}

struct Event {
    double time;
    std::uint64_t seq;
    int kind; // 0 = chunk ready at stage input, 1 = transmission done
    size_t flow;
    size_t stage;
    size_t chunk;
    bool operator>(const Event& o) const {
        if (time != o.time) return time > o.time;
        return seq > o.seq;
    }
};

struct EventFlow {
    size_t n = 0;
    double last_size = 0.0, chunk = 0.0;
    std::vector<int> links;          // link id per stage
    std::vector<double> lat;         // latency per stage
    std::vector<size_t> next_tx;     // per stage, next chunk to transmit
    std::vector<size_t> ready;       // per stage, chunks with data available
    std::vector<size_t> tx_done;     // per stage, chunks fully transmitted

    double size_of(size_t k) const { return k + 1 == n ? last_size : chunk; }
};

void run_event(const Topology& topo, std::vector<SimFlow>& flows, const PipelineConfig& cfg) {
    if (cfg.pipe_chunk == 0)
        throw std::runtime_error("exchange: event mode needs a positive pipe_chunk");
    const double c = static_cast<double>(cfg.pipe_chunk);
    const std::uint64_t S = cfg.slots();

    std::vector<EventFlow> ef(flows.size());
    std::vector<std::vector<std::pair<size_t, size_t>>> on_link(topo.links.size());
    for (size_t f = 0; f < flows.size(); ++f) {
        EventFlow& e = ef[f];
        e.chunk = c;
        e.n = static_cast<size_t>(std::ceil(flows[f].bytes / c));
        e.last_size = flows[f].bytes - c * static_cast<double>(e.n - 1);
        size_t H = flows[f].edges->size();
        e.links.assign(flows[f].edges->begin(), flows[f].edges->end());
        e.lat.resize(H);
        for (size_t h = 0; h < H; ++h) e.lat[h] = flows[f].chain[h].latency;
        e.next_tx.assign(H, 0);
        e.ready.assign(H, 0);
        e.tx_done.assign(H, 0);
        e.ready[0] = e.n;
        for (size_t h = 0; h < H; ++h) on_link[static_cast<size_t>(e.links[h])].push_back({f, h});
    }

    std::vector<char> busy(topo.links.size(), 0);
    std::vector<size_t> rr(topo.links.size(), 0);
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
    std::uint64_t seq = 0;

    auto eligible = [&](size_t f, size_t h) {
        EventFlow& e = ef[f];
        size_t k = e.next_tx[h];
        if (k >= e.n || k >= e.ready[h]) return false;
        if (h + 1 < e.links.size() && k >= S + e.tx_done[h + 1]) return false;
        return true;
    };

    auto dispatch = [&](size_t link, double t) {
        if (busy[link] || on_link[link].empty()) return;
        size_t m = on_link[link].size();
        for (size_t i = 0; i < m; ++i) {
            size_t idx = (rr[link] + i) % m;
            auto [f, h] = on_link[link][idx];
            if (!eligible(f, h)) continue;
            rr[link] = (idx + 1) % m;
            busy[link] = 1;
            size_t k = ef[f].next_tx[h]++;
            double done = t + ef[f].size_of(k) / topo.links[link].capacity;
            queue.push({done, seq++, 1, f, h, k});
            return;
        }
    };

    for (size_t e = 0; e < topo.links.size(); ++e) dispatch(e, 0.0);

    while (!queue.empty()) {
        Event ev = queue.top();
        queue.pop();
        EventFlow& e = ef[ev.flow];
        if (ev.kind == 1) { // transmission finished on stage ev.stage
            size_t link = static_cast<size_t>(e.links[ev.stage]);
            busy[link] = 0;
            e.tx_done[ev.stage] = ev.chunk + 1;
            queue.push({ev.time + e.lat[ev.stage], seq++, 0, ev.flow, ev.stage + 1, ev.chunk});
            // freeing this slot may unblock the previous stage of this flow
            if (ev.stage > 0) dispatch(static_cast<size_t>(e.links[ev.stage - 1]), ev.time);
            dispatch(link, ev.time);
        } else if (ev.stage == e.links.size()) { // delivered at the destination
            if (ev.chunk + 1 == e.n) flows[ev.flow].completion = ev.time;
        } else { // data available at the next stage input
            e.ready[ev.stage] = ev.chunk + 1;
            dispatch(static_cast<size_t>(e.links[ev.stage]), ev.time);
        }
    }
}

} // namespace

ExchangeResult simulate_exchange(const Topology& topo, const Plan& plan,
                                 const PipelineConfig& cfg, SimMode mode) {
    cfg.validate();
    std::vector<SimFlow> flows = collect_flows(topo, plan, cfg);
    if (mode == SimMode::ClosedForm)
        run_closed_form(topo, flows);
    else
        run_event(topo, flows, cfg);

    ExchangeResult result;
    result.pairs.resize(plan.pairs.size());
    for (size_t p = 0; p < plan.pairs.size(); ++p) {
        result.pairs[p].src = plan.pairs[p].src;
        result.pairs[p].dst = plan.pairs[p].dst;
    }
    result.link_bytes.assign(topo.links.size(), 0.0);
    for (const SimFlow& f : flows) {
        result.completion = std::max(result.completion, f.completion);
        PairResult& pr = result.pairs[f.pair];
        pr.bytes += f.bytes;
        pr.completion = std::max(pr.completion, f.completion);
        for (int e : *f.edges) result.link_bytes[static_cast<size_t>(e)] += f.bytes;
    }
    result.link_utilization.assign(topo.links.size(), 0.0);
    if (result.completion > 0.0) {
        double best = 0.0;
        for (size_t e = 0; e < topo.links.size(); ++e) {
            result.link_utilization[e] =
                result.link_bytes[e] / (topo.links[e].capacity * result.completion);
            if (result.link_utilization[e] > best) {
                best = result.link_utilization[e];
                result.bottleneck_link = static_cast<int>(e);
            }
        }
    }
    return result;
}

double speedup(const ExchangeResult& a, const ExchangeResult& b) {
    if (a.completion == 0.0 && b.completion == 0.0) return 1.0;
    if (a.completion == 0.0) return std::numeric_limits<double>::infinity();
    return b.completion / a.completion;
}

SimMode parse_sim_mode(std::string_view name) {
    if (name == "closed_form") return SimMode::ClosedForm;
    if (name == "event") return SimMode::Event;
    throw std::runtime_error("unknown simulation mode '" + std::string(name) +
                             "' (expected closed_form or event)");
}

const char* sim_mode_name(SimMode mode) {
    return mode == SimMode::ClosedForm ? "closed_form" : "event";
}

} // namespace nimble
