#include "goalnet/sim/placement.hpp"

#include <numeric>

#include "goalnet/goal/transform.hpp"

namespace goalnet::sim {

Placement place_jobs(const std::vector<goal::GoalSchedule>& jobs, PlacementStrategy strategy,
                     std::size_t system_size, std::uint64_t seed) {
    std::size_t needed = 0;
    for (const auto& j : jobs)
        needed += j.num_ranks();
    if (needed > system_size)
        throw InvalidArgument("placement needs " + std::to_string(needed) + " ranks but the system has " +
                              std::to_string(system_size));
    std::vector<Rank> pool(system_size);
    std::iota(pool.begin(), pool.end(), 0);
    if (strategy == PlacementStrategy::Random) {
        Rng rng(seed);
        rng.shuffle(pool);
    }
    Placement out;
    std::vector<goal::TenantPart> parts;
    std::size_t next = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        std::vector<Rank> mapping(pool.begin() + static_cast<std::ptrdiff_t>(next),
                                  pool.begin() + static_cast<std::ptrdiff_t>(next + jobs[j].num_ranks()));
        next += jobs[j].num_ranks();
        goal::GoalSchedule job = jobs[j];
        for (auto& rs : job.ranks)
            rs.job_id = static_cast<std::uint32_t>(j);
        out.assignment.push_back(mapping);
        parts.push_back({std::move(job), std::move(mapping)});
    }
    out.schedule = goal::merge_tenants(parts, system_size);
    return out;
}

} // namespace goalnet::sim
