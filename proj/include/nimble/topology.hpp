#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace nimble {

enum class DeviceKind { Gpu, Nic, Switch };

// Switch is the per-node NVSwitch hub; it only appears as a port endpoint.
struct DeviceId {
    int node = 0;
    DeviceKind kind = DeviceKind::Gpu;
    int index = 0;
    auto operator<=>(const DeviceId&) const = default;
};

std::string device_name(const DeviceId& d); // n0.g1, n0.nic2, n0.sw
DeviceId parse_device(std::string_view name);

enum class LinkKind { NvLink, NvSwitchPort, GpuNicAttach, Rail };

struct Link {
    int id = 0;
    DeviceId src;
    DeviceId dst;
    LinkKind kind = LinkKind::NvLink;
    double capacity = 0; // bytes/s
};

enum class Fabric { AllToAllNvLink, NvSwitch };

// Directed-link model of a rail-optimized GPU cluster: per-node NVLink mesh
// (or NVSwitch ports), GPU-NIC attach links, and same-index rails between
// nodes. Links are dense-id indexed in a fixed construction order so every
// traversal in the planner/simulator is deterministic.
struct Topology {
    std::string name;
    int nodes = 0;
    int gpus_per_node = 0;
    int nics_per_node = 0;
    Fabric fabric = Fabric::AllToAllNvLink;
    double nvlink_capacity = 0; // canonical default for NvLink/NvSwitchPort
    double rail_capacity = 0;   // canonical default for Rail (attach = 2x)
    std::vector<Link> links;

    const Link& link(int id) const { return links[static_cast<size_t>(id)]; }
    int link_count() const { return static_cast<int>(links.size()); }
    std::string link_name(int id) const;
    int find_link(const DeviceId& src, const DeviceId& dst) const; // -1 if absent

    // Dense-id lookups; all return a valid id or throw std::logic_error.
    int nvlink_id(int node, int src_gpu, int dst_gpu) const;
    int port_up_id(int node, int gpu) const;   // gpu -> hub
    int port_down_id(int node, int gpu) const; // hub -> gpu
    int attach_up_id(int node, int nic) const;   // gpu -> nic
    int attach_down_id(int node, int nic) const; // nic -> gpu
    int rail_id(int src_node, int dst_node, int rail) const;

    void validate() const; // throws std::runtime_error on broken invariants
};

Topology build_canonical(int nodes, int gpus_per_node, int nics_per_node,
                         double nvlink_capacity, double rail_capacity,
                         Fabric fabric, std::string name = "");

// Line-oriented document: header keys (nodes, gpus_per_node, nics_per_node,
// fabric, nvlink_gbps, rail_gbps, optional name) plus per-link capacity
// overrides "link <src> <dst> <gbps>". save() emits the normalized form;
// save(load(x)) is idempotent byte-for-byte.
Topology load_topology(std::string_view text);
std::string save_topology(const Topology& t);

// Shortest round-trip decimal formatting (also used by reports).
std::string format_double(double v);

} // namespace nimble
