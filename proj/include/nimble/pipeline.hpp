#pragma once

#include <cstdint>
#include <vector>

#include "nimble/planner.hpp"
#include "nimble/topology.hpp"
#include "nimble/units.hpp"

namespace nimble {

// Chunked store-and-forward transfer over a chain of links, with a bounded
// staging buffer between consecutive links. A chunk's slot in the buffer
// after hop h is taken when hop h starts transmitting it and freed when hop
// h+1 has pushed it out, which is exactly the counter-based flow control the
// runtime uses: a sender stalls until the receiver reports a free slot.
struct PipelineConfig {
    std::uint64_t p2p_buffer = 10 * MiB;
    std::uint64_t pipe_chunk = 512 * KiB; // 0 = fluid (no chunking, no fill)
    double hop_latency = 2e-6;            // GPU-GPU stages (NvLink, switch port)
    double nic_hop_latency = 2e-6;        // NIC attach and rail stages
    int channels_per_peer = 1;            // each channel brings its own buffer

    void validate() const;
    double latency_for(LinkKind kind) const;
    std::uint64_t slots() const; // staging slots: channels * buffer / chunk

    // No chunking, no latency: transfers finish in exactly bytes / bottleneck.
    static PipelineConfig ideal();
};

struct HopSpec {
    double bandwidth = 0.0; // bytes per second
    double latency = 0.0;   // seconds, propagation after serialization
};

// Per-chunk, per-stage timeline of one simulated transfer.
struct TransferTrace {
    std::vector<double> chunk_bytes;
    std::vector<std::vector<double>> start;     // [stage][chunk] tx begins
    std::vector<std::vector<double>> tx_done;   // [stage][chunk] link freed
    std::vector<std::vector<double>> delivered; // [stage][chunk] data landed
};

std::vector<HopSpec> hop_chain(const Topology& topo, const CandidatePath& path,
                               const PipelineConfig& cfg);

double simulate_transfer(const std::vector<HopSpec>& chain, double message_bytes,
                         const PipelineConfig& cfg, TransferTrace* trace = nullptr);

double effective_bandwidth(const std::vector<HopSpec>& chain, double message_bytes,
                           const PipelineConfig& cfg);

double bottleneck_bandwidth(const std::vector<HopSpec>& chain);

// Time a chunk needs to traverse the whole chain beyond what the bottleneck
// link alone charges: sum_h(chunk/bw_h + lat_h) - chunk/bw_min. This is the
// ramp cost a long transfer pays once; steady state runs at the bottleneck.
double pipeline_fill_overhead(const std::vector<HopSpec>& chain, const PipelineConfig& cfg);

} // namespace nimble
