#pragma once

#include <optional>
#include <string>
#include <vector>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::goal {

struct ValidationReport {
    struct Cycle {
        Rank rank;
        std::vector<TaskId> witness; // first and last element are the same task
    };
    struct TaskRef {
        Rank rank;
        TaskId task;
    };
    struct DanglingDep {
        Rank rank;
        Dep dep;
    };
    struct Mismatch {
        Rank src;
        Rank dst;
        Tag tag;
        std::size_t sends;
        std::size_t recvs;
    };

    std::vector<Cycle> cycles;
    std::vector<DanglingDep> dangling_deps;
    std::vector<TaskRef> peer_out_of_range;
    std::vector<TaskRef> self_sends;
    std::vector<Mismatch> mismatches;
    // Tasks that can never run even under synchronous (rendezvous) matching;
    // only computed when every other check passed.
    std::vector<TaskRef> stalled;

    bool empty() const {
        return cycles.empty() && dangling_deps.empty() && peer_out_of_range.empty() && self_sends.empty() &&
               mismatches.empty() && stalled.empty();
    }
    std::size_t problem_count() const {
        return cycles.size() + dangling_deps.size() + peer_out_of_range.size() + self_sends.size() +
               mismatches.size() + stalled.size();
    }
    std::string to_string(const GoalSchedule* s = nullptr) const;
};

ValidationReport validate(const GoalSchedule& s);

// One cycle in the rank's dependency graph as [a, b, ..., a], if any.
std::optional<std::vector<TaskId>> find_cycle(const RankSchedule& rs);

// Topological order of a rank's tasks; empty optional when cyclic.
std::optional<std::vector<TaskId>> topo_order(const RankSchedule& rs);

} // namespace goalnet::goal
