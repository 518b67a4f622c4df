#include "goalnet/sim/engine.hpp"

#include <sstream>

namespace goalnet::sim {

namespace {

std::string describe(const goal::Task& t) {
    std::ostringstream os;
    switch (t.kind) {
    case goal::TaskKind::Send:
        os << "send " << t.bytes << "b to " << t.peer << " tag " << t.tag;
        break;
    case goal::TaskKind::Recv:
        os << "recv " << t.bytes << "b from " << t.peer << " tag " << t.tag;
        break;
    case goal::TaskKind::Calc:
        os << "calc " << t.duration_ns;
        break;
    }
    if (!t.label.empty())
        os << " [" << t.label << "]";
    return os.str();
}

[[noreturn]] void report_deadlock(const goal::GoalSchedule& s, const std::vector<std::vector<TaskTiming>>& timing,
                                  const std::vector<goal::RankGraph>& graphs, TimeNs now, std::size_t remaining) {
    std::vector<BlockedTask> blocked;
    for (const auto& rs : s.ranks) {
        for (TaskId t = 0; t < rs.tasks.size(); ++t) {
            const auto& tm = timing[rs.rank][t];
            if (tm.completed_ns >= 0)
                continue;
            BlockedTask b{{rs.rank, t}, tm.posted_ns >= 0, {}};
            for (TaskId p : graphs[rs.rank].pred[t])
                if (timing[rs.rank][p].completed_ns < 0)
                    b.unmet_deps.push_back(p);
            blocked.push_back(std::move(b));
        }
    }
    std::ostringstream os;
    os << "deadlock at " << now << " ns: " << remaining << " of " << s.task_count() << " tasks never completed";
    std::size_t shown = 0;
    // tasks stuck in the backend are the root causes; list them first
    for (int pass = 0; pass < 2 && shown < 8; ++pass) {
        for (const auto& b : blocked) {
            if (b.posted != (pass == 0) || shown >= 8)
                continue;
            const auto& task = s[b.handle.rank].tasks[b.handle.task];
            os << "\n  rank " << b.handle.rank << " task " << b.handle.task << " (" << describe(task) << "): ";
            if (b.posted) {
                os << "posted, waiting for its peer";
            } else {
                os << "waiting on";
                for (TaskId p : b.unmet_deps)
                    os << ' ' << p;
            }
            ++shown;
        }
    }
    if (blocked.size() > shown)
        os << "\n  ... and " << blocked.size() - shown << " more";
    throw DeadlockError(os.str(), std::move(blocked));
}

} // namespace

SimResult run_simulation(const goal::GoalSchedule& s, Backend& backend) {
    SimResult res;
    auto& timing = res.timing;
    timing.resize(s.num_ranks());
    std::vector<goal::RankGraph> graphs;
    std::vector<std::vector<std::size_t>> indeg(s.num_ranks());
    graphs.reserve(s.num_ranks());
    for (const auto& rs : s.ranks) {
        if (rs.rank >= s.num_ranks())
            throw InvalidArgument("rank table entry " + std::to_string(rs.rank) + " out of order");
        graphs.emplace_back(rs);
        timing[rs.rank].resize(rs.tasks.size());
        auto& in = indeg[rs.rank];
        in.resize(rs.tasks.size());
        for (std::size_t t = 0; t < in.size(); ++t)
            in[t] = graphs.back().pred[t].size();
    }
    backend.setup(s);

    auto post = [&](Rank r, TaskId t, TimeNs now) {
        const goal::Task& task = s[r].tasks[t];
        Post p;
        p.handle = {r, t};
        p.peer = task.peer;
        p.bytes = task.bytes;
        p.tag = task.tag;
        p.duration_ns = task.duration_ns;
        p.cpu = task.cpu;
        p.nic = task.nic;
        p.t_ready = now;
        timing[r][t].posted_ns = now;
        switch (task.kind) {
        case goal::TaskKind::Send:
            backend.post_send(p);
            break;
        case goal::TaskKind::Recv:
            backend.post_recv(p);
            break;
        case goal::TaskKind::Calc:
            backend.post_calc(p);
            break;
        }
    };

    std::size_t remaining = s.task_count();
    for (const auto& rs : s.ranks)
        for (TaskId t = 0; t < rs.tasks.size(); ++t)
            if (indeg[rs.rank][t] == 0)
                post(rs.rank, t, 0);

    TimeNs now = 0;
    while (remaining > 0) {
        auto c = backend.next_completion();
        if (!c)
            report_deadlock(s, timing, graphs, now, remaining);
        const Rank r = c->handle.rank;
        const TaskId t = c->handle.task;
        if (r >= s.num_ranks() || t >= timing[r].size())
            throw Error("backend", backend.name() + " completed an unknown task");
        auto& tm = timing[r][t];
        if (tm.posted_ns < 0 || tm.completed_ns >= 0)
            throw Error("backend", backend.name() + " completed rank " + std::to_string(r) + " task " +
                                       std::to_string(t) + " without a pending post");
        if (c->time_ns < now || c->time_ns < tm.posted_ns)
            throw Error("backend", backend.name() + " reported a completion in the past");
        now = c->time_ns;
        tm.completed_ns = now;
        res.completions.push_back(*c);
        --remaining;
        for (TaskId v : graphs[r].succ[t])
            if (--indeg[r][v] == 0)
                post(r, v, now);
    }
    if (auto lost = backend.unmatched_sends(); !lost.empty()) {
        std::ostringstream os;
        os << "deadlock: " << lost.size() << " message(s) were sent but never received";
        std::vector<BlockedTask> blocked;
        for (const auto& h : lost) {
            if (blocked.size() < 8)
                os << "\n  rank " << h.rank << " task " << h.task << " (" << describe(s[h.rank].tasks[h.task])
                   << "): no matching recv";
            blocked.push_back({h, true, {}});
        }
        throw DeadlockError(os.str(), std::move(blocked));
    }
    res.report = compute_stats(s, timing, backend.messages(), backend.stats());
    return res;
}

} // namespace goalnet::sim
