#include "goalnet/schedgen/microbench.hpp"

#include <numeric>

namespace goalnet::schedgen {

using goal::GoalSchedule;
using goal::Task;

namespace {

void check(std::size_t n, Bytes bytes, const char* what) {
    if (n < 2)
        throw InvalidArgument(std::string(what) + " needs at least 2 ranks");
    if (bytes < 1)
        throw InvalidArgument(std::string(what) + " needs at least 1 byte per message");
}

} // namespace

GoalSchedule gen_incast(std::size_t n, Bytes bytes) {
    check(n, bytes, "incast");
    GoalSchedule s(n);
    for (Rank r = 1; r < n; ++r) {
        s[r].add(Task::send(bytes, 0));
        s[0].add(Task::recv(bytes, r));
    }
    return s;
}

std::vector<Rank> derangement(std::size_t n, std::uint64_t seed) {
    if (n < 2)
        throw InvalidArgument("no derangement of fewer than 2 ranks");
    Rng rng(seed);
    std::vector<Rank> pi(n);
    // rejection sampling: uniform over derangements, ~e tries on average
    for (;;) {
        std::iota(pi.begin(), pi.end(), 0);
        rng.shuffle(pi);
        bool fixed = false;
        for (std::size_t i = 0; i < n && !fixed; ++i)
            fixed = pi[i] == i;
        if (!fixed)
            return pi;
    }
}

GoalSchedule gen_permutation(std::size_t n, Bytes bytes, std::uint64_t seed) {
    check(n, bytes, "permutation");
    const auto pi = derangement(n, seed);
    GoalSchedule s(n);
    for (Rank i = 0; i < n; ++i) {
        s[i].add(Task::send(bytes, pi[i]));
        s[pi[i]].add(Task::recv(bytes, i));
    }
    // keep each rank's send before its recv in task order
    for (auto& rs : s.ranks)
        if (rs.tasks.size() == 2 && rs.tasks[0].kind == goal::TaskKind::Recv)
            std::swap(rs.tasks[0], rs.tasks[1]);
    return s;
}

GoalSchedule gen_ring_exchange(std::size_t n, Bytes bytes, std::size_t rounds) {
    check(n, bytes, "ring exchange");
    GoalSchedule s(n);
    for (Rank i = 0; i < n; ++i) {
        auto& rs = s[i];
        const Rank next = static_cast<Rank>((i + 1) % n);
        const Rank prev = static_cast<Rank>((i + n - 1) % n);
        for (std::size_t r = 0; r < rounds; ++r) {
            TaskId snd = rs.add(Task::send(bytes, next, static_cast<Tag>(r)));
            TaskId rcv = rs.add(Task::recv(bytes, prev, static_cast<Tag>(r)));
            if (r > 0) {
                for (TaskId a : {snd, rcv}) {
                    rs.require(a, snd - 2);
                    rs.require(a, rcv - 2);
                }
            }
        }
        rs.canonicalize();
    }
    return s;
}

} // namespace goalnet::schedgen
