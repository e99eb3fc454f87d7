#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nimble/pipeline.hpp"
#include "nimble/planner.hpp"
#include "nimble/topology.hpp"
#include "nimble/units.hpp"
#include "nimble/workloads.hpp"

using namespace nimble;

TEST_CASE("fluid transfer is latency plus drain at the bottleneck") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 0;
    std::vector<HopSpec> one = {{120e9, 2e-6}};
    CHECK(simulate_transfer(one, 256.0 * MiB, cfg) ==
          doctest::Approx(2e-6 + 256.0 * MiB / 120e9).epsilon(1e-15));
    std::vector<HopSpec> chain = {{120e9, 2e-6}, {50e9, 3e-6}, {100e9, 2e-6}};
    CHECK(simulate_transfer(chain, 64.0 * MiB, cfg) ==
          doctest::Approx(7e-6 + 64.0 * MiB / 50e9).epsilon(1e-15));
    CHECK(simulate_transfer(chain, 0.0, cfg) == 0.0);
    CHECK(bottleneck_bandwidth(chain) == 50e9);
}

TEST_CASE("chunked single hop serializes back to back") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 512 * KiB;
    cfg.hop_latency = 2e-6;
    std::vector<HopSpec> one = {{1e9, 2e-6}};
    double m = 4.0 * MiB; // 8 chunks
    CHECK(simulate_transfer(one, m, cfg) == doctest::Approx(m / 1e9 + 2e-6).epsilon(1e-15));
}

TEST_CASE("chunked equal-bandwidth two-hop pipeline costs one extra chunk") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 512 * KiB;
    std::vector<HopSpec> chain = {{1e9, 2e-6}, {1e9, 2e-6}};
    double tau = 512.0 * KiB / 1e9;
    double m = 4.0 * MiB; // 8 chunks
    CHECK(simulate_transfer(chain, m, cfg) == doctest::Approx(9 * tau + 4e-6).epsilon(1e-14));
    CHECK(pipeline_fill_overhead(chain, cfg) == doctest::Approx(tau + 4e-6).epsilon(1e-14));
}

TEST_CASE("uneven trailing chunk still ships") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 512 * KiB;
    cfg.hop_latency = 0;
    std::vector<HopSpec> one = {{1e9, 0}};
    double m = 512.0 * KiB + 100.0;
    CHECK(simulate_transfer(one, m, cfg) == doctest::Approx(m / 1e9).epsilon(1e-14));
    TransferTrace tr;
    simulate_transfer(one, m, cfg, &tr);
    REQUIRE(tr.chunk_bytes.size() == 2);
    CHECK(tr.chunk_bytes[0] == 512.0 * KiB);
    CHECK(tr.chunk_bytes[1] == 100.0);
}

TEST_CASE("staging buffer slots bound what the sender may push ahead") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 512 * KiB;
    cfg.p2p_buffer = MiB; // 2 slots
    cfg.hop_latency = 0;
    cfg.nic_hop_latency = 0;
    CHECK(cfg.slots() == 2);
    // fast first hop into a slow second: without flow control the sender
    // would race 16 chunks ahead; with 2 slots it stays 2 ahead
    std::vector<HopSpec> chain = {{4e9, 0}, {1e9, 0}};
    TransferTrace tr;
    double m = 8.0 * MiB;
    simulate_transfer(chain, m, cfg, &tr);
    size_t n = tr.chunk_bytes.size();
    REQUIRE(n == 16);
    std::uint64_t slots = cfg.slots();
    for (size_t k = slots; k < n; ++k)
        CHECK(tr.start[0][k] >= tr.tx_done[1][k - slots]);
    // occupancy check: chunks resident between entering stage-1's buffer and
    // leaving it never exceed the slot count
    for (size_t k = 0; k < n; ++k) {
        double t = tr.start[1][k]; // a moment the buffer is certainly in use
        int resident = 0;
        for (size_t j = 0; j < n; ++j)
            if (tr.start[0][j] <= t && t < tr.tx_done[1][j]) ++resident;
        CHECK(resident <= static_cast<int>(slots));
    }
    // the slow hop still never idles once primed
    CHECK(simulate_transfer(chain, m, cfg) == doctest::Approx(m / 1e9 + 512.0 * KiB / 4e9));
}

TEST_CASE("hop_chain maps link kinds to their latencies") {
    Topology t = build_canonical(2, 4, 2, gbps(120), gbps(50), Fabric::AllToAllNvLink);
    RankMap m = make_rank_map(8, 4);
    PipelineConfig cfg;
    cfg.hop_latency = 7e-6;
    cfg.nic_hop_latency = 3e-6;
    auto cands = enumerate_paths(t, m, 0, 5);
    auto chain = hop_chain(t, cands[0].edges.size() == 4 ? cands[0] : cands[1], cfg);
    REQUIRE(chain.size() == 4); // nvlink, attach, rail, attach
    CHECK(chain[0].bandwidth == gbps(120));
    CHECK(chain[0].latency == 7e-6);
    CHECK(chain[1].bandwidth == gbps(100));
    CHECK(chain[1].latency == 3e-6);
    CHECK(chain[2].bandwidth == gbps(50));
    CHECK(chain[2].latency == 3e-6);
}

TEST_CASE("effective bandwidth approaches the bottleneck for long messages") {
    PipelineConfig cfg; // defaults: 512 KiB chunks, 10 MiB buffer, 2 us hops
    std::vector<HopSpec> chain = {{120e9, 2e-6}, {120e9, 2e-6}};
    double m = 100.0 * cfg.p2p_buffer;
    CHECK(effective_bandwidth(chain, m, cfg) >= 0.98 * bottleneck_bandwidth(chain));
}

TEST_CASE("config validation") {
    PipelineConfig cfg;
    cfg.pipe_chunk = 20 * MiB; // larger than the buffer: zero slots
    CHECK_THROWS(cfg.validate());
    PipelineConfig neg;
    neg.hop_latency = -1.0;
    CHECK_THROWS(neg.validate());
    PipelineConfig chans;
    chans.channels_per_peer = 0;
    CHECK_THROWS(chans.validate());
    PipelineConfig ideal = PipelineConfig::ideal();
    ideal.validate();
    CHECK(ideal.pipe_chunk == 0);
    CHECK(ideal.hop_latency == 0.0);
}
