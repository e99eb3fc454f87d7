#include "nimble/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nimble {

void PipelineConfig::validate() const {
    if (hop_latency < 0.0 || nic_hop_latency < 0.0)
        throw std::runtime_error("pipeline: latencies must be >= 0");
    if (channels_per_peer < 1)
        throw std::runtime_error("pipeline: channels_per_peer must be >= 1");
    if (pipe_chunk > 0 && slots() == 0)
        throw std::runtime_error("pipeline: p2p_buffer holds less than one chunk");
}

double PipelineConfig::latency_for(LinkKind kind) const {
    switch (kind) {
    case LinkKind::NvLink:
    case LinkKind::NvSwitchPort: return hop_latency;
    case LinkKind::GpuNicAttach:
    case LinkKind::Rail: return nic_hop_latency;
    }
    return hop_latency;
}

std::uint64_t PipelineConfig::slots() const {
    if (pipe_chunk == 0) return 0;
    return static_cast<std::uint64_t>(channels_per_peer) * (p2p_buffer / pipe_chunk);
}

PipelineConfig PipelineConfig::ideal() {
    PipelineConfig cfg;
    cfg.pipe_chunk = 0;
    cfg.hop_latency = 0.0;
    cfg.nic_hop_latency = 0.0;
    return cfg;
}

std::vector<HopSpec> hop_chain(const Topology& topo, const CandidatePath& path,
                               const PipelineConfig& cfg) {
    std::vector<HopSpec> chain;
    chain.reserve(path.edges.size());
    for (int e : path.edges) {
        const Link& link = topo.links[static_cast<size_t>(e)];
        chain.push_back({link.capacity, cfg.latency_for(link.kind)});
    }
    return chain;
}

double bottleneck_bandwidth(const std::vector<HopSpec>& chain) {
    double bw = std::numeric_limits<double>::infinity();
    for (const HopSpec& h : chain) bw = std::min(bw, h.bandwidth);
    return bw;
}

double pipeline_fill_overhead(const std::vector<HopSpec>& chain, const PipelineConfig& cfg) {
    double c = static_cast<double>(cfg.pipe_chunk);
    double fill = 0.0;
    for (const HopSpec& h : chain) fill += c / h.bandwidth + h.latency;
    return chain.empty() ? 0.0 : fill - c / bottleneck_bandwidth(chain);
}

double simulate_transfer(const std::vector<HopSpec>& chain, double message_bytes,
                         const PipelineConfig& cfg, TransferTrace* trace) {
    cfg.validate();
    if (chain.empty()) throw std::runtime_error("transfer: empty hop chain");
    for (const HopSpec& h : chain) {
        if (!(h.bandwidth > 0.0)) throw std::runtime_error("transfer: hop bandwidth must be > 0");
        if (h.latency < 0.0) throw std::runtime_error("transfer: hop latency must be >= 0");
    }
    if (message_bytes < 0.0) throw std::runtime_error("transfer: negative message");
    if (message_bytes == 0.0) return 0.0;

    // Fluid limit: infinitely fine chunks stream at the bottleneck rate and
    // only pay the propagation delays once.
    if (cfg.pipe_chunk == 0) {
        double t = message_bytes / bottleneck_bandwidth(chain);
        for (const HopSpec& h : chain) t += h.latency;
        return t;
    }

    const double c = static_cast<double>(cfg.pipe_chunk);
    const size_t n = static_cast<size_t>(std::ceil(message_bytes / c));
    const size_t H = chain.size();
    const std::uint64_t S = cfg.slots();

    std::vector<double> sizes(n, c);
    sizes[n - 1] = message_bytes - c * static_cast<double>(n - 1);

    std::vector<std::vector<double>> start(H, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> tx_done(H, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> delivered(H, std::vector<double>(n, 0.0));

    for (size_t k = 0; k < n; ++k) {
        for (size_t h = 0; h < H; ++h) {
            double t = h == 0 ? 0.0 : delivered[h - 1][k];
            if (k > 0) t = std::max(t, tx_done[h][k - 1]);
            if (h + 1 < H && k >= S) t = std::max(t, tx_done[h + 1][k - S]);
            start[h][k] = t;
            tx_done[h][k] = t + sizes[k] / chain[h].bandwidth;
            delivered[h][k] = tx_done[h][k] + chain[h].latency;
        }
    }

    double completion = delivered[H - 1][n - 1];
    if (trace) {
        trace->chunk_bytes = std::move(sizes);
        trace->start = std::move(start);
        trace->tx_done = std::move(tx_done);
        trace->delivered = std::move(delivered);
    }
    return completion;
}

double effective_bandwidth(const std::vector<HopSpec>& chain, double message_bytes,
                           const PipelineConfig& cfg) {
    if (!(message_bytes > 0.0)) throw std::runtime_error("effective bandwidth: empty message");
    return message_bytes / simulate_transfer(chain, message_bytes, cfg);
}

} // namespace nimble
