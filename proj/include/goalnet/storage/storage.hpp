#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "goalnet/common.hpp"
#include "goalnet/goal/schedule.hpp"

namespace goalnet::storage {

enum class IoOp : std::uint8_t { Read, Write };

struct IoRequest {
    std::uint64_t asu = 0;
    std::uint64_t lba = 0;
    Bytes bytes = 0;
    IoOp op = IoOp::Read;
    TimeNs t_ns = 0;
};

// SPC CSV: asu,lba,bytes,opcode,timestamp with opcode in {r,R,w,W} and the
// timestamp in decimal seconds. Blank lines are skipped. Result is stably
// sorted by timestamp.
std::vector<IoRequest> parse_spc_trace(std::string_view text);
std::vector<IoRequest> parse_spc_file(const std::filesystem::path& p);
std::string emit_spc_trace(const std::vector<IoRequest>& reqs);

// Exact decimal seconds to ns, rounding half up past the 9th digit.
TimeNs parse_seconds(std::string_view s);

// Rough stand-in for an OLTP block trace: mostly small writes of 512 B
// multiples over 24 ASUs with exponential inter-arrivals.
struct SyntheticTraceOptions {
    std::size_t requests = 5000;
    std::uint64_t asus = 24;
    double write_fraction = 0.77;
    double mean_interarrival_us = 8000;
    std::uint64_t seed = 1;
};
std::vector<IoRequest> synth_financial_trace(const SyntheticTraceOptions& o);

struct StorageCluster {
    std::uint32_t hosts = 4;
    std::uint32_t ccs = 1;
    std::uint32_t bss = 8;
    std::uint32_t mds = 1;
    std::uint32_t gs = 1;
    std::uint32_t slb = 1;
    std::uint32_t replication = 3;
    Bytes control_bytes = 256;
    TimeNs service_ns = 2000;
    std::uint64_t stripe_blocks = 2048; // LBAs per placement stripe
    std::uint64_t seed = 0;
    bool closed_loop = false;
    // Route the host's first control message through these services first.
    bool via_slb = false;
    bool via_gs = false;
    // Optional override: (asu, lba) -> BSS index. Must be < bss.
    std::function<std::uint32_t(std::uint64_t, std::uint64_t)> placement;

    void check() const;
    std::size_t num_ranks() const;
    Rank host_rank(std::uint32_t i) const { return i; }
    Rank ccs_rank(std::uint32_t i) const { return hosts + i; }
    Rank bss_rank(std::uint32_t i) const { return hosts + ccs + i; }
    Rank mds_rank(std::uint32_t i) const { return hosts + ccs + bss + i; }
    Rank gs_rank(std::uint32_t i) const { return hosts + ccs + bss + mds + i; }
    Rank slb_rank(std::uint32_t i) const { return hosts + ccs + bss + mds + gs + i; }

    Rank host_of(const IoRequest& r) const { return host_rank(static_cast<std::uint32_t>(r.asu % hosts)); }
    // Primary first; replicas are the following BSS indices.
    std::vector<Rank> replicas(const IoRequest& r, std::uint32_t count) const;
    std::size_t extra_hops() const { return (via_slb ? 1 : 0) + (via_gs ? 1 : 0); }
};

// Message count: reads 4, writes 2 + 2R, plus extra_hops() per request.
goal::GoalSchedule gen_direct_drive(const std::vector<IoRequest>& reqs, const StorageCluster& c);

} // namespace goalnet::storage
