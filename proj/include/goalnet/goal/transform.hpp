#pragma once

#include <vector>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::goal {

// A self-contained piece of one rank's DAG with local task ids. Generators
// build fragments and splice them into rank schedules.
struct Fragment {
    std::vector<Task> tasks;
    std::vector<Dep> deps;

    TaskId add(Task t) {
        tasks.push_back(std::move(t));
        return static_cast<TaskId>(tasks.size() - 1);
    }
    void require(TaskId after, TaskId before) { deps.push_back({before, after}); }
};

// Appends `f` to `rs`, making every root of the fragment depend on each of
// `preds`. Returns the ids (in `rs`) of the fragment's sinks; an empty
// fragment returns `preds` unchanged so chaining stays transparent.
std::vector<TaskId> splice(RankSchedule& rs, const Fragment& f, const std::vector<TaskId>& preds);

// Rewrites rank ids and peers through `mapping` (old rank -> new rank).
// Throws InvalidArgument on a non-injective or out-of-range mapping.
GoalSchedule remap_ranks(const GoalSchedule& s, const std::vector<Rank>& mapping, std::size_t new_num_ranks);

struct TenantPart {
    GoalSchedule schedule;
    std::vector<Rank> mapping; // source rank -> target rank
};

// Overlays several schedules on one system. Where k >= 2 sub-DAGs land on the
// same target rank, a zero-cost dummy root fans out to their roots and a dummy
// sink joins their sinks. Tags of co-located parts are shifted into disjoint
// ranges (part index << 24) so tenants never match each other's messages.
// Clashing labels are renamed.
GoalSchedule merge_tenants(const std::vector<TenantPart>& parts, std::size_t target_num_ranks);

inline constexpr unsigned kTenantTagShift = 24;

} // namespace goalnet::goal
