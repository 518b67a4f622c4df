#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "goalnet/sim/backend.hpp"

namespace goalnet::sim {

struct MctSummary {
    std::size_t count = 0;
    double mean = 0;
    TimeNs p50 = 0;
    TimeNs p99 = 0;
    TimeNs max = 0;
};

struct RankStats {
    TimeNs finish_ns = 0; // last completion on the rank
    TimeNs busy_ns = 0;   // union of calc intervals
    TimeNs idle_ns = 0;   // makespan - busy
};

// Start and end of one task, as seen by the engine.
struct TaskTiming {
    TimeNs posted_ns = -1;
    TimeNs completed_ns = -1;
    bool operator==(const TaskTiming&) const = default;
};

struct StatsReport {
    TimeNs makespan_ns = 0;
    std::map<std::uint32_t, TimeNs> jobs; // job id -> makespan
    std::optional<MctSummary> mct;        // absent without messages
    std::vector<RankStats> ranks;
    BackendStats backend;
    std::vector<MessageRecord> messages;
};

// Nearest-rank percentile of an ascending sample; pct in [1, 100].
TimeNs nearest_rank(const std::vector<TimeNs>& sorted, unsigned pct);

MctSummary summarize_mct(std::vector<TimeNs> samples);

StatsReport compute_stats(const goal::GoalSchedule& s, const std::vector<std::vector<TaskTiming>>& timing,
                          std::vector<MessageRecord> messages, BackendStats backend = {});

} // namespace goalnet::sim
