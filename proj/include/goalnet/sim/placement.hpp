#pragma once

#include <cstdint>
#include <vector>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::sim {

enum class PlacementStrategy { Packed, Random };

struct Placement {
    goal::GoalSchedule schedule;
    std::vector<std::vector<Rank>> assignment; // job -> system rank per job rank
};

// Packed gives job j the next consecutive block of system ranks. Random deals
// a seeded shuffle of all system ranks to the jobs in order. Every rank of job
// j gets job id j.
Placement place_jobs(const std::vector<goal::GoalSchedule>& jobs, PlacementStrategy strategy,
                     std::size_t system_size, std::uint64_t seed = 0);

} // namespace goalnet::sim
