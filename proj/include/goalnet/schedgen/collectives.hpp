#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "goalnet/goal/schedule.hpp"
#include "goalnet/goal/transform.hpp"

namespace goalnet::schedgen {

enum class MpiOp { Send, Recv, Allreduce, Bcast, ReduceScatter, Allgather, Alltoall, Barrier };
enum class Algo { Ring, RecursiveDoubling, BinomialTree, Linear };

std::string_view to_string(MpiOp op);
std::string_view to_string(Algo algo);
MpiOp parse_op(std::string_view name);     // case-insensitive, throws InvalidArgument
Algo parse_algo(std::string_view name);    // ring, recursive_doubling, binomial_tree, linear

bool is_collective(MpiOp op);
bool supported(MpiOp op, Algo algo);

struct CollectiveOptions {
    // Cost of combining received data in reductions; 0 emits no calc at all.
    double reduce_ns_per_byte = 0;
};

// Per participating rank (indexed by position in `comm`), the sub-DAG that
// implements `op`. Every message of the instance carries `tag`; channels are
// used in step order on both ends, so FIFO matching pairs them correctly.
//
// Sizes: allreduce/reduce_scatter/allgather/alltoall move ceil(bytes/P) per
// step or block; bcast moves `bytes`; barrier moves 1-byte messages.
// `root` is a rank id from `comm` (bcast only).
std::vector<goal::Fragment> expand_collective(MpiOp op, const std::vector<Rank>& comm, Bytes bytes, Algo algo,
                                              Tag tag, Rank root = 0, const CollectiveOptions& opts = {});

// Bytes each comm position sends under the expansion above.
std::vector<Bytes> analytic_bytes_sent(MpiOp op, std::size_t P, Bytes bytes, Algo algo, std::size_t root_pos = 0);

// Standalone schedule with one collective over ranks 0..P-1.
goal::GoalSchedule gen_collective(MpiOp op, std::size_t P, Bytes bytes, Algo algo, Rank root = 0,
                                  const CollectiveOptions& opts = {});

} // namespace goalnet::schedgen
