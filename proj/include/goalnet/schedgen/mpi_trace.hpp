#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "goalnet/schedgen/collectives.hpp"

namespace goalnet::schedgen {

struct MpiTraceEvent {
    Rank rank = 0;
    MpiOp op = MpiOp::Send;
    Bytes bytes = 0;
    Rank peer = 0;            // SEND/RECV
    Rank root = 0;            // BCAST
    std::vector<Rank> comm;   // collectives
    TimeNs tstart_ns = 0;
    TimeNs tend_ns = 0;
};

using MpiTrace = std::vector<std::vector<MpiTraceEvent>>; // [rank][event]

// One CSV text per rank, index = rank. Lines: op,bytes,peer_or_root,comm,tstart_ns,tend_ns
// Blank lines, '#' comments and an "op,..." header are skipped.
MpiTrace parse_mpi_trace(const std::vector<std::string>& per_rank_csv);
MpiTrace parse_mpi_trace_files(const std::vector<std::filesystem::path>& files);

struct AlgoSelection {
    Algo allreduce = Algo::Ring;
    Algo bcast = Algo::BinomialTree;
    Algo reduce_scatter = Algo::Ring;
    Algo allgather = Algo::Ring;
    Algo alltoall = Algo::Linear;
    Algo barrier = Algo::RecursiveDoubling;
    CollectiveOptions options;

    Algo for_op(MpiOp op) const;
};

// First collective instance tag; instance k uses kCollectiveTagBase + k.
inline constexpr Tag kCollectiveTagBase = Tag{1} << 16;

// Program order per rank, bridged by calcs of max(0, gap) between events.
goal::GoalSchedule trace_to_goal(const MpiTrace& trace, const AlgoSelection& algos = {});

} // namespace goalnet::schedgen
