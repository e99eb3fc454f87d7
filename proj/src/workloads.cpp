#include "nimble/workloads.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace nimble {

std::uint64_t DemandMatrix::row_sum(int s) const {
    std::uint64_t sum = 0;
    for (int d = 0; d < ranks; ++d) sum += at(s, d);
    return sum;
}

std::uint64_t DemandMatrix::total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t b : bytes) sum += b;
    return sum;
}

void DemandMatrix::validate() const {
    if (ranks < 1 || bytes.size() != static_cast<size_t>(ranks) * ranks)
        throw std::runtime_error("demand matrix: bad shape");
    for (int r = 0; r < ranks; ++r)
        if (at(r, r) != 0) throw std::runtime_error("demand matrix: nonzero diagonal");
}

RankMap make_rank_map(int ranks, int ranks_per_node) {
    if (ranks < 1 || ranks_per_node < 1)
        throw std::runtime_error("rank map: ranks and ranks_per_node must be >= 1");
    return RankMap{ranks, ranks_per_node};
}

static DemandMatrix blank(int ranks, std::string label) {
    if (ranks < 2) throw std::runtime_error("workload: need at least 2 ranks");
    DemandMatrix m;
    m.ranks = ranks;
    m.bytes.assign(static_cast<size_t>(ranks) * ranks, 0);
    m.label = std::move(label);
    return m;
}

DemandMatrix gen_p2p(int ranks, int src, int dst, std::uint64_t size) {
    DemandMatrix m = blank(ranks, "p2p");
    if (src < 0 || src >= ranks || dst < 0 || dst >= ranks)
        throw std::runtime_error("p2p: rank out of range");
    if (src == dst) throw std::runtime_error("p2p: src and dst must differ");
    m.at(src, dst) = size;
    return m;
}

// Split `total` evenly over `peers`; the leftover goes to the last peer so
// row sums stay exact.
static void split_even(std::uint64_t total, const std::vector<int>& peers,
                       DemandMatrix& m, int sender) {
    if (peers.empty()) return;
    std::uint64_t base = total / peers.size();
    std::uint64_t rem = total % peers.size();
    for (size_t i = 0; i < peers.size(); ++i)
        m.at(sender, peers[i]) = base + (i + 1 == peers.size() ? rem : 0);
}

DemandMatrix gen_skewed_a2av(int ranks, std::uint64_t per_rank_bytes, double ratio,
                             int hot_dst, std::uint64_t seed, bool per_sender_hot) {
    DemandMatrix m = blank(ranks, "skewed_a2av");
    m.seed = seed;
    if (hot_dst < 0 || hot_dst >= ranks) throw std::runtime_error("skewed: hot_dst out of range");
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::runtime_error("skewed: ratio must be in [0,1]");

    for (int s = 0; s < ranks; ++s) {
        int hot = hot_dst;
        if (per_sender_hot) {
            hot = (hot_dst + s) % ranks;
            if (hot == s) hot = (hot + 1) % ranks;
        }
        std::vector<int> cold;
        for (int d = 0; d < ranks; ++d)
            if (d != s && d != hot) cold.push_back(d);
        if (s == hot) {
            split_even(per_rank_bytes, cold, m, s);
            continue;
        }
        auto hot_share = static_cast<std::uint64_t>(
            std::floor(static_cast<long double>(ratio) * static_cast<long double>(per_rank_bytes)));
        m.at(s, hot) = hot_share;
        split_even(per_rank_bytes - hot_share, cold, m, s);
    }
    return m;
}

DemandMatrix gen_stencil_1d(int ranks, std::uint64_t halo_bytes) {
    DemandMatrix m = blank(ranks, "stencil_1d");
    for (int r = 0; r + 1 < ranks; ++r) {
        m.at(r, r + 1) = halo_bytes;
        m.at(r + 1, r) = halo_bytes;
    }
    return m;
}

DemandMatrix gen_aggregator(int ranks, std::vector<int> dsts, std::uint64_t per_src_bytes) {
    DemandMatrix m = blank(ranks, "aggregator");
    if (dsts.empty()) throw std::runtime_error("aggregator: destination set is empty");
    std::sort(dsts.begin(), dsts.end());
    dsts.erase(std::unique(dsts.begin(), dsts.end()), dsts.end());
    for (int d : dsts)
        if (d < 0 || d >= ranks) throw std::runtime_error("aggregator: destination out of range");
    for (int s = 0; s < ranks; ++s) {
        if (std::binary_search(dsts.begin(), dsts.end(), s)) continue;
        split_even(per_src_bytes, dsts, m, s);
    }
    return m;
}

DemandMatrix gen_irregular(int ranks, std::uint64_t total_bytes, double sparsity,
                           std::uint64_t seed) {
    if (!(sparsity > 0.0 && sparsity <= 1.0))
        throw std::runtime_error("irregular: sparsity must be in (0,1]");
    DemandMatrix m = blank(ranks, "irregular");
    m.seed = seed;
    std::mt19937_64 rng(seed);
    auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    std::vector<size_t> kept;
    for (int s = 0; s < ranks; ++s)
        for (int d = 0; d < ranks; ++d) {
            if (s == d) continue;
            if (u01() < sparsity) kept.push_back(static_cast<size_t>(s) * ranks + d);
        }
    if (kept.empty()) kept.push_back(1); // entry (0,1)

    std::vector<double> w(kept.size());
    double wsum = 0;
    for (double& x : w) {
        x = u01() + 1e-9;
        wsum += x;
    }
    std::uint64_t assigned = 0;
    for (size_t i = 0; i < kept.size(); ++i) {
        auto v = static_cast<std::uint64_t>(
            std::floor(static_cast<double>(total_bytes) * w[i] / wsum));
        m.bytes[kept[i]] = v;
        assigned += v;
    }
    // Hand out the flooring leftover one byte at a time; it is < kept.size().
    std::uint64_t leftover = total_bytes - assigned;
    for (size_t i = 0; leftover > 0; i = (i + 1) % kept.size(), --leftover)
        ++m.bytes[kept[i]];
    return m;
}

std::string write_payload_matrix(const DemandMatrix& m) {
    std::string out;
    for (int s = 0; s < m.ranks; ++s) {
        for (int d = 0; d < m.ranks; ++d) {
            if (d) out += ' ';
            out += std::to_string(m.at(s, d));
        }
        out += '\n';
    }
    return out;
}

DemandMatrix read_payload_matrix(std::string_view text) {
    std::vector<std::vector<std::uint64_t>> rows;
    std::istringstream ss{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::uint64_t> row;
        std::string tok;
        while (ls >> tok) {
            std::uint64_t v = 0;
            auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
                throw std::runtime_error("payload matrix parse error at line " +
                                         std::to_string(lineno) + ": bad count '" + tok + "'");
            row.push_back(v);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("payload matrix parse error: empty document");
    int ranks = static_cast<int>(rows.size());
    DemandMatrix m = blank(ranks, "payload_file");
    for (int s = 0; s < ranks; ++s) {
        if (rows[static_cast<size_t>(s)].size() != static_cast<size_t>(ranks))
            throw std::runtime_error("payload matrix parse error: row " + std::to_string(s) +
                                     " has " + std::to_string(rows[static_cast<size_t>(s)].size()) +
                                     " entries, expected " + std::to_string(ranks));
        for (int d = 0; d < ranks; ++d) m.at(s, d) = rows[static_cast<size_t>(s)][static_cast<size_t>(d)];
    }
    m.validate();
    return m;
}

} // namespace nimble
