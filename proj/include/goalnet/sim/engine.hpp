#pragma once

#include <vector>

#include "goalnet/sim/backend.hpp"
#include "goalnet/sim/stats.hpp"

namespace goalnet::sim {

struct BlockedTask {
    Handle handle;
    bool posted = false;              // handed to the backend but never finished
    std::vector<TaskId> unmet_deps;   // predecessors that never completed
};

class DeadlockError : public Error {
public:
    DeadlockError(const std::string& what, std::vector<BlockedTask> blocked)
        : Error("deadlock", what), _blocked(std::move(blocked)) {}
    const std::vector<BlockedTask>& blocked() const { return _blocked; }

private:
    std::vector<BlockedTask> _blocked;
};

struct SimResult {
    StatsReport report;
    std::vector<std::vector<TaskTiming>> timing; // [rank][task]
    std::vector<Completion> completions;          // in the order received
};

// Drives `backend` through the schedule. The schedule is not validated here;
// an unmatched message surfaces as DeadlockError.
SimResult run_simulation(const goal::GoalSchedule& s, Backend& backend);

} // namespace goalnet::sim
