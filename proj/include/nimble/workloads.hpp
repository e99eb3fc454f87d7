#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nimble/topology.hpp"
#include "nimble/units.hpp"

namespace nimble {

// Row-major R x R byte counts, row = sender. Diagonal is always zero.
struct DemandMatrix {
    int ranks = 0;
    std::vector<std::uint64_t> bytes;
    std::uint64_t chunk = 4 * MiB; // quantization granularity metadata
    std::uint64_t seed = 0;
    std::string label;

    std::uint64_t& at(int s, int d) { return bytes[static_cast<size_t>(s) * ranks + d]; }
    std::uint64_t at(int s, int d) const { return bytes[static_cast<size_t>(s) * ranks + d]; }
    std::uint64_t row_sum(int s) const;
    std::uint64_t total() const;
    void validate() const; // shape, zero diagonal
};

// Block layout: rank r lives on node r / ranks_per_node, GPU r % ranks_per_node.
struct RankMap {
    int ranks = 0;
    int ranks_per_node = 1;
    int node_of(int rank) const { return rank / ranks_per_node; }
    int ordinal_of(int rank) const { return rank % ranks_per_node; }
    DeviceId device(int rank) const { return {node_of(rank), DeviceKind::Gpu, ordinal_of(rank)}; }
};

RankMap make_rank_map(int ranks, int ranks_per_node);

DemandMatrix gen_p2p(int ranks, int src, int dst, std::uint64_t size);

// Every sender directs `ratio` of its payload at hot_dst (rounded down to
// whole bytes) and splits the rest evenly over the remaining peers, leftover
// to the last cold peer. The hot rank spreads its own payload evenly.
// per_sender_hot rotates the hot destination by sender index instead.
DemandMatrix gen_skewed_a2av(int ranks, std::uint64_t per_rank_bytes, double ratio,
                             int hot_dst = 0, std::uint64_t seed = 0,
                             bool per_sender_hot = false);

DemandMatrix gen_stencil_1d(int ranks, std::uint64_t halo_bytes); // non-periodic

DemandMatrix gen_aggregator(int ranks, std::vector<int> dsts, std::uint64_t per_src_bytes);

// Seeded sparse matrix; entry selection and weights come from one mt19937_64
// stream, so output is identical across platforms for a given seed.
DemandMatrix gen_irregular(int ranks, std::uint64_t total_bytes, double sparsity,
                           std::uint64_t seed);

// R lines of R whitespace-separated integers.
std::string write_payload_matrix(const DemandMatrix& m);
DemandMatrix read_payload_matrix(std::string_view text);

} // namespace nimble
