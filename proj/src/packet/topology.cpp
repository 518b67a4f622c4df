#include "goalnet/packet/topology.hpp"

#include <cmath>

namespace goalnet::packet {

void FatTreeSpec::check() const {
    if (hosts_per_tor == 0 || num_tors == 0)
        throw InvalidArgument("fat tree needs at least one ToR and one host per ToR");
    if (uplinks_per_tor == 0)
        throw InvalidArgument("fat tree needs at least one uplink per ToR");
    if (uplinks_per_tor > hosts_per_tor)
        throw InvalidArgument("fat tree oversubscription below 1:1 (" + std::to_string(uplinks_per_tor) +
                              " uplinks for " + std::to_string(hosts_per_tor) + " hosts per ToR)");
    if (num_cores < uplinks_per_tor)
        throw InvalidArgument("fat tree needs at least as many cores as uplinks per ToR");
    if (!(link_rate_gbps > 0) || !std::isfinite(link_rate_gbps))
        throw InvalidArgument("link rate must be positive");
    if (link_latency_ns < 0)
        throw InvalidArgument("link latency must be non-negative");
}

FatTree::FatTree(const FatTreeSpec& spec) : _spec(spec) {
    _spec.check();
    const std::uint32_t H = num_hosts(), T = _spec.num_tors, U = _spec.uplinks_per_tor;
    auto h = [](std::uint32_t i) { return "h" + std::to_string(i); };
    auto t = [](std::uint32_t i) { return "t" + std::to_string(i); };
    auto c = [](std::uint32_t i) { return "c" + std::to_string(i); };
    for (std::uint32_t i = 0; i < H; ++i)
        _links.push_back({i, tor_node(tor_of(i)), h(i) + "->" + t(tor_of(i))});
    for (std::uint32_t i = 0; i < H; ++i)
        _links.push_back({tor_node(tor_of(i)), i, t(tor_of(i)) + "->" + h(i)});
    for (std::uint32_t r = 0; r < T; ++r)
        for (std::uint32_t u = 0; u < U; ++u)
            _links.push_back({tor_node(r), core_node(u), t(r) + "->" + c(u)});
    for (std::uint32_t u = 0; u < U; ++u)
        for (std::uint32_t r = 0; r < T; ++r)
            _links.push_back({core_node(u), tor_node(r), c(u) + "->" + t(r)});
}

std::uint32_t FatTree::next_link(std::uint32_t node, std::uint32_t dst, std::uint32_t uplink) const {
    const std::uint32_t H = num_hosts(), T = _spec.num_tors;
    if (node < H)
        return host_up(node);
    if (node < H + T) {
        const std::uint32_t tor = node - H;
        return tor_of(dst) == tor ? tor_down(dst) : tor_up(tor, uplink);
    }
    return core_down(node - H - T, tor_of(dst));
}

std::vector<std::uint32_t> FatTree::path(std::uint32_t src, std::uint32_t dst, std::uint32_t uplink) const {
    std::vector<std::uint32_t> out;
    std::uint32_t node = src;
    while (node != dst) {
        const std::uint32_t l = next_link(node, dst, uplink);
        out.push_back(l);
        node = _links[l].to;
    }
    return out;
}

TimePs FatTree::serialize_ps(Bytes bytes) const {
    // 1 Gbps moves one bit per ns, so one byte takes 8000 / gbps ps
    return static_cast<TimePs>(std::ceil(static_cast<double>(bytes) * 8000.0 / _spec.link_rate_gbps - 1e-9));
}

} // namespace goalnet::packet
