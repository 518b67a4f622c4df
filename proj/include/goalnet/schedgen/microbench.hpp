#pragma once

#include <cstdint>
#include <vector>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::schedgen {

// Ranks 1..n-1 each send `bytes` to rank 0.
goal::GoalSchedule gen_incast(std::size_t n, Bytes bytes);

// Seeded derangement pi: rank i sends to pi(i) and receives from pi^-1(i).
std::vector<Rank> derangement(std::size_t n, std::uint64_t seed);
goal::GoalSchedule gen_permutation(std::size_t n, Bytes bytes, std::uint64_t seed);

// `rounds` rounds of send to (i+1) mod n and recv from (i-1) mod n; round r+1
// starts once both tasks of round r completed. Round r uses tag r.
goal::GoalSchedule gen_ring_exchange(std::size_t n, Bytes bytes, std::size_t rounds);

} // namespace goalnet::schedgen
