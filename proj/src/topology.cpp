#include "nimble/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nimble {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string device_name(const DeviceId& d) {
    char buf[32];
    switch (d.kind) {
    case DeviceKind::Gpu: std::snprintf(buf, sizeof(buf), "n%d.g%d", d.node, d.index); break;
    case DeviceKind::Nic: std::snprintf(buf, sizeof(buf), "n%d.nic%d", d.node, d.index); break;
    case DeviceKind::Switch: std::snprintf(buf, sizeof(buf), "n%d.sw", d.node); break;
    }
    return buf;
}

static int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 0)
        throw std::runtime_error("bad " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

DeviceId parse_device(std::string_view name) {
    auto fail = [&] { throw std::runtime_error("bad device name '" + std::string(name) + "'"); };
    if (name.size() < 3 || name[0] != 'n') fail();
    size_t dot = name.find('.');
    if (dot == std::string_view::npos || dot + 1 >= name.size()) fail();
    DeviceId d;
    d.node = parse_int(name.substr(1, dot - 1), "node number");
    std::string_view rest = name.substr(dot + 1);
    if (rest == "sw") {
        d.kind = DeviceKind::Switch;
        d.index = 0;
    } else if (rest.size() > 3 && rest.substr(0, 3) == "nic") {
        d.kind = DeviceKind::Nic;
        d.index = parse_int(rest.substr(3), "nic index");
    } else if (rest.size() > 1 && rest[0] == 'g') {
        d.kind = DeviceKind::Gpu;
        d.index = parse_int(rest.substr(1), "gpu index");
    } else {
        fail();
    }
    return d;
}

std::string Topology::link_name(int id) const {
    const Link& l = link(id);
    return device_name(l.src) + "->" + device_name(l.dst);
}

int Topology::find_link(const DeviceId& src, const DeviceId& dst) const {
    for (const Link& l : links)
        if (l.src == src && l.dst == dst) return l.id;
    return -1;
}

// Construction order: per-node intra links (NVLink mesh or switch ports),
// then per-node attach pairs, then rails over ordered node pairs. The
// id formulas below mirror build_canonical exactly.
namespace {

int intra_links_per_node(const Topology& t) {
    if (t.fabric == Fabric::AllToAllNvLink)
        return t.gpus_per_node * (t.gpus_per_node - 1);
    return 2 * t.gpus_per_node;
}

} // namespace

int Topology::nvlink_id(int node, int src_gpu, int dst_gpu) const {
    if (fabric != Fabric::AllToAllNvLink || src_gpu == dst_gpu)
        throw std::logic_error("nvlink_id: no such link");
    int g = gpus_per_node;
    int within = src_gpu * (g - 1) + (dst_gpu < src_gpu ? dst_gpu : dst_gpu - 1);
    return node * intra_links_per_node(*this) + within;
}

int Topology::port_up_id(int node, int gpu) const {
    if (fabric != Fabric::NvSwitch) throw std::logic_error("port_up_id: wrong fabric");
    return node * intra_links_per_node(*this) + gpu;
}

int Topology::port_down_id(int node, int gpu) const {
    if (fabric != Fabric::NvSwitch) throw std::logic_error("port_down_id: wrong fabric");
    return node * intra_links_per_node(*this) + gpus_per_node + gpu;
}

int Topology::attach_up_id(int node, int nic) const {
    if (nic < 0 || nic >= nics_per_node) throw std::logic_error("attach_up_id: bad nic");
    return nodes * intra_links_per_node(*this) + node * 2 * nics_per_node + 2 * nic;
}

int Topology::attach_down_id(int node, int nic) const {
    return attach_up_id(node, nic) + 1;
}

int Topology::rail_id(int src_node, int dst_node, int rail) const {
    if (src_node == dst_node || rail < 0 || rail >= nics_per_node)
        throw std::logic_error("rail_id: no such rail");
    int base = nodes * intra_links_per_node(*this) + nodes * 2 * nics_per_node;
    // ordered node pairs (a,b), a != b, lexicographic
    int pair_idx = src_node * (nodes - 1) + (dst_node < src_node ? dst_node : dst_node - 1);
    return base + pair_idx * nics_per_node + rail;
}

Topology build_canonical(int nodes, int gpus_per_node, int nics_per_node,
                         double nvlink_capacity, double rail_capacity,
                         Fabric fabric, std::string name) {
    if (nodes < 1) throw std::runtime_error("build_canonical: nodes must be >= 1");
    if (gpus_per_node < 1) throw std::runtime_error("build_canonical: gpus_per_node must be >= 1");
    if (nics_per_node < 0 || nics_per_node > gpus_per_node)
        throw std::runtime_error("build_canonical: nics_per_node must be in [0, gpus_per_node]");
    if (!(nvlink_capacity > 0)) throw std::runtime_error("build_canonical: nvlink capacity must be positive");
    if (nics_per_node > 0 && !(rail_capacity > 0))
        throw std::runtime_error("build_canonical: rail capacity must be positive when NICs are present");

    Topology t;
    t.name = std::move(name);
    t.nodes = nodes;
    t.gpus_per_node = gpus_per_node;
    t.nics_per_node = nics_per_node;
    t.fabric = fabric;
    t.nvlink_capacity = nvlink_capacity;
    t.rail_capacity = rail_capacity;

    auto add = [&](DeviceId src, DeviceId dst, LinkKind kind, double cap) {
        Link l;
        l.id = static_cast<int>(t.links.size());
        l.src = src;
        l.dst = dst;
        l.kind = kind;
        l.capacity = cap;
        t.links.push_back(l);
    };
    auto gpu = [](int n, int i) { return DeviceId{n, DeviceKind::Gpu, i}; };
    auto nic = [](int n, int i) { return DeviceId{n, DeviceKind::Nic, i}; };
    auto hub = [](int n) { return DeviceId{n, DeviceKind::Switch, 0}; };

    for (int n = 0; n < nodes; ++n) {
        if (fabric == Fabric::AllToAllNvLink) {
            for (int i = 0; i < gpus_per_node; ++i)
                for (int j = 0; j < gpus_per_node; ++j)
                    if (i != j) add(gpu(n, i), gpu(n, j), LinkKind::NvLink, nvlink_capacity);
        } else {
            for (int i = 0; i < gpus_per_node; ++i)
                add(gpu(n, i), hub(n), LinkKind::NvSwitchPort, nvlink_capacity);
            for (int i = 0; i < gpus_per_node; ++i)
                add(hub(n), gpu(n, i), LinkKind::NvSwitchPort, nvlink_capacity);
        }
    }
    for (int n = 0; n < nodes; ++n) {
        for (int k = 0; k < nics_per_node; ++k) {
            add(gpu(n, k), nic(n, k), LinkKind::GpuNicAttach, 2 * rail_capacity);
            add(nic(n, k), gpu(n, k), LinkKind::GpuNicAttach, 2 * rail_capacity);
        }
    }
    for (int a = 0; a < nodes; ++a)
        for (int b = 0; b < nodes; ++b) {
            if (a == b) continue;
            for (int r = 0; r < nics_per_node; ++r)
                add(nic(a, r), nic(b, r), LinkKind::Rail, rail_capacity);
        }

    t.validate();
    return t;
}

void Topology::validate() const {
    auto fail = [](const std::string& msg) { throw std::runtime_error("topology invariant: " + msg); };
    if (nodes < 1 || gpus_per_node < 1) fail("empty topology");
    if (nics_per_node < 0 || nics_per_node > gpus_per_node) fail("nics_per_node out of range");

    size_t expected = static_cast<size_t>(nodes) * intra_links_per_node(*this)
                    + static_cast<size_t>(nodes) * 2 * nics_per_node
                    + static_cast<size_t>(nodes) * (nodes - 1) * nics_per_node;
    if (links.size() != expected) fail("unexpected link count");

    for (const Link& l : links) {
        if (l.id != &l - links.data()) fail("non-dense link ids");
        if (!(l.capacity > 0)) fail("non-positive capacity on " + link_name(l.id));
        auto in_range = [&](const DeviceId& d) {
            if (d.node < 0 || d.node >= nodes) return false;
            switch (d.kind) {
            case DeviceKind::Gpu: return d.index >= 0 && d.index < gpus_per_node;
            case DeviceKind::Nic: return d.index >= 0 && d.index < nics_per_node;
            case DeviceKind::Switch: return d.index == 0 && fabric == Fabric::NvSwitch;
            }
            return false;
        };
        if (!in_range(l.src) || !in_range(l.dst)) fail("endpoint out of range on " + link_name(l.id));
        switch (l.kind) {
        case LinkKind::NvLink:
            if (fabric != Fabric::AllToAllNvLink) fail("NvLink in NvSwitch fabric");
            if (l.src.kind != DeviceKind::Gpu || l.dst.kind != DeviceKind::Gpu ||
                l.src.node != l.dst.node || l.src.index == l.dst.index)
                fail("malformed NvLink " + link_name(l.id));
            break;
        case LinkKind::NvSwitchPort:
            if (fabric != Fabric::NvSwitch) fail("switch port in NvLink fabric");
            if (l.src.node != l.dst.node ||
                !((l.src.kind == DeviceKind::Gpu && l.dst.kind == DeviceKind::Switch) ||
                  (l.src.kind == DeviceKind::Switch && l.dst.kind == DeviceKind::Gpu)))
                fail("malformed switch port " + link_name(l.id));
            break;
        case LinkKind::GpuNicAttach:
            if (l.src.node != l.dst.node) fail("attach crosses nodes: " + link_name(l.id));
            if (!((l.src.kind == DeviceKind::Gpu && l.dst.kind == DeviceKind::Nic) ||
                  (l.src.kind == DeviceKind::Nic && l.dst.kind == DeviceKind::Gpu)))
                fail("malformed attach " + link_name(l.id));
            if (l.src.index != l.dst.index) fail("attach must pair equal ordinals: " + link_name(l.id));
            break;
        case LinkKind::Rail:
            if (l.src.kind != DeviceKind::Nic || l.dst.kind != DeviceKind::Nic)
                fail("rail endpoints must be NICs: " + link_name(l.id));
            if (l.src.node == l.dst.node) fail("rail within one node: " + link_name(l.id));
            if (l.src.index != l.dst.index) fail("rail mismatch: " + link_name(l.id));
            break;
        }
    }

    // Exactly one NvLink per ordered GPU pair per node / one port per direction.
    if (fabric == Fabric::AllToAllNvLink) {
        for (int n = 0; n < nodes; ++n)
            for (int i = 0; i < gpus_per_node; ++i)
                for (int j = 0; j < gpus_per_node; ++j) {
                    if (i == j) continue;
                    int id = nvlink_id(n, i, j);
                    const Link& l = link(id);
                    if (l.kind != LinkKind::NvLink || l.src.index != i || l.dst.index != j || l.src.node != n)
                        fail("NvLink index table broken");
                }
    } else {
        for (int n = 0; n < nodes; ++n)
            for (int i = 0; i < gpus_per_node; ++i) {
                if (link(port_up_id(n, i)).src.index != i) fail("port table broken");
                if (link(port_down_id(n, i)).dst.index != i) fail("port table broken");
            }
    }
}

// ---- file format ----

namespace {

struct Line {
    int number;
    std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::string_view text) {
    std::vector<Line> out;
    int num = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++num;
        if (size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        Line line{num, {}};
        std::istringstream ss{std::string(raw)};
        std::string tok;
        while (ss >> tok) line.tokens.push_back(tok);
        if (!line.tokens.empty()) out.push_back(std::move(line));
    }
    return out;
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
    throw std::runtime_error("topology parse error at line " + std::to_string(line) + ": " + msg);
}

double parse_gbps(const Line& l, const std::string& s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) parse_fail(l.number, "bad number '" + s + "'");
    if (!(v > 0)) parse_fail(l.number, "capacity must be positive, got '" + s + "'");
    return v;
}

} // namespace

Topology load_topology(std::string_view text) {
    int nodes = -1, gpus = -1, nics = -1;
    Fabric fabric = Fabric::AllToAllNvLink;
    bool have_fabric = false;
    double nvlink_gbps = -1, rail_gbps = -1;
    std::string name;
    std::vector<Line> overrides;

    for (const Line& l : tokenize(text)) {
        const std::string& key = l.tokens[0];
        auto want = [&](size_t n) {
            if (l.tokens.size() != n + 1)
                parse_fail(l.number, "key '" + key + "' expects " + std::to_string(n) + " value(s)");
        };
        auto once = [&](bool seen) { if (seen) parse_fail(l.number, "duplicate key '" + key + "'"); };
        if (key == "name") {
            want(1); once(!name.empty());
            name = l.tokens[1];
        } else if (key == "nodes") {
            want(1); once(nodes >= 0);
            nodes = parse_int(l.tokens[1], "nodes");
        } else if (key == "gpus_per_node") {
            want(1); once(gpus >= 0);
            gpus = parse_int(l.tokens[1], "gpus_per_node");
        } else if (key == "nics_per_node") {
            want(1); once(nics >= 0);
            nics = parse_int(l.tokens[1], "nics_per_node");
        } else if (key == "fabric") {
            want(1); once(have_fabric);
            if (l.tokens[1] == "alltoall") fabric = Fabric::AllToAllNvLink;
            else if (l.tokens[1] == "nvswitch") fabric = Fabric::NvSwitch;
            else parse_fail(l.number, "fabric must be 'alltoall' or 'nvswitch', got '" + l.tokens[1] + "'");
            have_fabric = true;
        } else if (key == "nvlink_gbps") {
            want(1); once(nvlink_gbps >= 0);
            nvlink_gbps = parse_gbps(l, l.tokens[1]);
        } else if (key == "rail_gbps") {
            want(1); once(rail_gbps >= 0);
            rail_gbps = parse_gbps(l, l.tokens[1]);
        } else if (key == "link") {
            want(3);
            overrides.push_back(l);
        } else {
            parse_fail(l.number, "unknown key '" + key + "'");
        }
    }

    auto require = [&](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("topology parse error: missing key '") + what + "'");
    };
    require(nodes >= 0, "nodes");
    require(gpus >= 0, "gpus_per_node");
    require(nics >= 0, "nics_per_node");
    require(have_fabric, "fabric");
    require(nvlink_gbps > 0, "nvlink_gbps");
    if (nics > 0) require(rail_gbps > 0, "rail_gbps");
    if (rail_gbps < 0) rail_gbps = 0;

    Topology t = build_canonical(nodes, gpus, nics, nvlink_gbps * 1e9,
                                 nics > 0 ? rail_gbps * 1e9 : 1.0, fabric, name);
    if (nics == 0) t.rail_capacity = rail_gbps * 1e9;

    for (const Line& l : overrides) {
        DeviceId src, dst;
        try {
            src = parse_device(l.tokens[1]);
            dst = parse_device(l.tokens[2]);
        } catch (const std::exception& e) {
            parse_fail(l.number, e.what());
        }
        double cap = parse_gbps(l, l.tokens[3]) * 1e9;
        if (src.kind == DeviceKind::Nic && dst.kind == DeviceKind::Nic &&
            src.node != dst.node && src.index != dst.index)
            parse_fail(l.number, "rail mismatch: " + l.tokens[1] + " -> " + l.tokens[2] +
                                 " (rails connect equal NIC indices)");
        int id = t.find_link(src, dst);
        if (id < 0) parse_fail(l.number, "no such link " + l.tokens[1] + " -> " + l.tokens[2]);
        t.links[static_cast<size_t>(id)].capacity = cap;
    }

    t.validate();
    return t;
}

std::string save_topology(const Topology& t) {
    std::string out;
    if (!t.name.empty()) out += "name " + t.name + "\n";
    out += "nodes " + std::to_string(t.nodes) + "\n";
    out += "gpus_per_node " + std::to_string(t.gpus_per_node) + "\n";
    out += "nics_per_node " + std::to_string(t.nics_per_node) + "\n";
    out += std::string("fabric ") + (t.fabric == Fabric::AllToAllNvLink ? "alltoall" : "nvswitch") + "\n";
    out += "nvlink_gbps " + format_double(t.nvlink_capacity / 1e9) + "\n";
    if (t.rail_capacity > 0)
        out += "rail_gbps " + format_double(t.rail_capacity / 1e9) + "\n";
    for (const Link& l : t.links) {
        double def = 0;
        switch (l.kind) {
        case LinkKind::NvLink:
        case LinkKind::NvSwitchPort: def = t.nvlink_capacity; break;
        case LinkKind::GpuNicAttach: def = 2 * t.rail_capacity; break;
        case LinkKind::Rail: def = t.rail_capacity; break;
        }
        if (l.capacity != def)
            out += "link " + device_name(l.src) + " " + device_name(l.dst) + " " +
                   format_double(l.capacity / 1e9) + "\n";
    }
    return out;
}

} // namespace nimble
