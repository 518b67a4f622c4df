#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "goalnet/goal/schedule.hpp"
#include "goalnet/goal/transform.hpp"

namespace goalnet::nccl {

using GpuId = std::uint32_t;

enum class NcclOp { Broadcast, Allreduce, Allgather, ReduceScatter };
enum class Proto { Simple, LL };

std::string_view to_string(NcclOp op);
std::string_view to_string(Proto p);
NcclOp parse_nccl_op(std::string_view s);
Proto parse_proto(std::string_view s);

struct GpuKernelEvent {
    GpuId gpu = 0;
    std::string stream;
    bool compute = false;
    NcclOp op = NcclOp::Allreduce; // collectives only
    Bytes bytes = 0;
    std::string comm;
    GpuId root = 0;                // broadcast only
    TimeNs ts = 0;
    TimeNs te = 0;
    bool operator==(const GpuKernelEvent&) const = default;
};

struct GpuStream {
    std::string id;
    std::vector<GpuKernelEvent> events; // sorted, non-overlapping
    bool operator==(const GpuStream&) const = default;
};

struct GpuTrace {
    std::map<GpuId, std::vector<GpuStream>> gpus; // streams in id order
    std::map<std::string, std::vector<GpuId>> communicators;
    bool operator==(const GpuTrace&) const = default;
};

// Stage 1. `per_gpu_json` holds one document per GPU:
//   {"gpu": 0, "streams": {"<id>": [{"kind": "collective"|"compute", "op": ..., "bytes": ...,
//     "comm": ..., "root": ..., "ts": ..., "te": ...}, ...]}}
// and `communicators_json` maps comm id -> GPU id list.
GpuTrace parse_gpu_trace(const std::vector<std::string>& per_gpu_json, std::string_view communicators_json);
GpuTrace parse_gpu_trace_files(const std::vector<std::filesystem::path>& gpu_files,
                               const std::filesystem::path& communicators_file);

struct EmittedTrace {
    std::vector<std::string> per_gpu; // in GPU id order
    std::string communicators;
};
EmittedTrace emit_gpu_trace(const GpuTrace& t);

struct NcclConfig {
    std::uint32_t nchannels = 1;
    Proto proto = Proto::Simple;
    Bytes slot_bytes_simple = 524288;
    Bytes slot_bytes_ll = 32768;
    double ll_wire_factor = 2.0;
    // GPU ids in ring order; members are ordered by it. Empty = ascending id.
    std::vector<GpuId> ring_order;

    void check() const;
};

// One collective call seen by all members of its communicator.
struct CollectiveInstance {
    NcclOp op;
    Bytes bytes;
    std::string comm;
    GpuId root;
    Tag tag_base; // channel c uses tag_base + c
};

// Stage 2 result for one GPU: chains per stream between a dummy root and
// sink. Collectives are zero-duration placeholder calcs listed in
// `placeholders` (task id -> instance index).
struct GpuDag {
    GpuId gpu = 0;
    goal::RankSchedule dag;
    std::map<TaskId, std::size_t> placeholders;
    std::uint16_t num_streams = 0;
};

struct StreamDags {
    std::vector<GpuDag> gpus; // GPU id order
    std::vector<CollectiveInstance> instances;
};

StreamDags build_stream_dags(const GpuTrace& t);

inline constexpr Tag kNcclTagBase = 0x10000;
inline constexpr std::uint32_t kMaxChannels = 64;

// Stage 3 for one collective. Result is indexed by position in `ring`
// (already in ring order); peers are GPU ids.
std::vector<goal::Fragment> decompose_collective(NcclOp op, const std::vector<GpuId>& ring, Bytes bytes,
                                                 const NcclConfig& cfg, Tag tag_base, GpuId root = 0);

// Members of `comm` in ring order under `cfg`.
std::vector<GpuId> ring_order(const std::vector<GpuId>& members, const NcclConfig& cfg);

// Stage 3 over all GPUs: placeholders replaced by their fragments. The
// result's `rank` fields hold GPU ids and peers are GPU ids.
std::vector<GpuDag> decompose_all(const StreamDags& dags, const GpuTrace& t, const NcclConfig& cfg);

struct GpuNodeMap {
    std::map<GpuId, std::pair<Rank, std::uint16_t>> gpu; // gpu -> (node, local index)
    double intra_bandwidth_GBps = 150;
    TimeNs intra_latency_ns = 0;

    std::size_t num_nodes() const;
    // `gpus_per_node` consecutive GPU ids per node.
    static GpuNodeMap blocked(const std::vector<GpuId>& gpus, std::size_t gpus_per_node);
};

// Duration of an elided intra-node transfer.
TimeNs intra_node_ns(Bytes bytes, const GpuNodeMap& m);

// Stage 4. One rank per node.
goal::GoalSchedule map_gpus_to_nodes(const std::vector<GpuDag>& dags, const GpuNodeMap& m);

// All four stages.
goal::GoalSchedule nccl_to_goal(const GpuTrace& t, const NcclConfig& cfg, const GpuNodeMap& m);

} // namespace goalnet::nccl
