#pragma once

#include <string>
#include <vector>

#include "goalnet/common.hpp"

namespace goalnet::packet {

using TimePs = std::int64_t;

// Two-level fat tree. Uplink u of every ToR goes to core u, so cores past
// uplinks_per_tor stay idle.
struct FatTreeSpec {
    std::uint32_t hosts_per_tor = 8;
    std::uint32_t num_tors = 2;
    std::uint32_t uplinks_per_tor = 8;
    std::uint32_t num_cores = 8;
    double link_rate_gbps = 200;
    TimeNs link_latency_ns = 500;

    void check() const;
    std::uint32_t num_hosts() const { return hosts_per_tor * num_tors; }
    double oversubscription() const { return static_cast<double>(hosts_per_tor) / uplinks_per_tor; }
};

// A directed link with its transmit queue at the `from` end.
struct Link {
    std::uint32_t from = 0; // node id
    std::uint32_t to = 0;
    std::string name;
};

// Nodes: hosts [0, H), ToRs [H, H+T), cores after that.
class FatTree {
public:
    explicit FatTree(const FatTreeSpec& spec);

    const FatTreeSpec& spec() const { return _spec; }
    std::uint32_t num_hosts() const { return _spec.num_hosts(); }
    std::uint32_t tor_of(std::uint32_t host) const { return host / _spec.hosts_per_tor; }
    bool is_host(std::uint32_t node) const { return node < num_hosts(); }
    std::uint32_t tor_node(std::uint32_t tor) const { return num_hosts() + tor; }
    std::uint32_t core_node(std::uint32_t core) const { return num_hosts() + _spec.num_tors + core; }

    const std::vector<Link>& links() const { return _links; }

    std::uint32_t host_up(std::uint32_t host) const { return host; }
    std::uint32_t tor_down(std::uint32_t host) const { return num_hosts() + host; }
    std::uint32_t tor_up(std::uint32_t tor, std::uint32_t uplink) const {
        return 2 * num_hosts() + tor * _spec.uplinks_per_tor + uplink;
    }
    std::uint32_t core_down(std::uint32_t uplink, std::uint32_t tor) const {
        return 2 * num_hosts() + _spec.num_tors * _spec.uplinks_per_tor + uplink * _spec.num_tors + tor;
    }

    // Link leaving `node` towards host `dst`; `uplink` picks the core.
    std::uint32_t next_link(std::uint32_t node, std::uint32_t dst, std::uint32_t uplink) const;
    // Links from src to dst through `uplink` (ignored within one ToR).
    std::vector<std::uint32_t> path(std::uint32_t src, std::uint32_t dst, std::uint32_t uplink) const;

    // Serialization time of `bytes` on one link, rounded up to a picosecond.
    TimePs serialize_ps(Bytes bytes) const;
    TimePs latency_ps() const { return _spec.link_latency_ns * 1000; }

private:
    FatTreeSpec _spec;
    std::vector<Link> _links;
};

} // namespace goalnet::packet
