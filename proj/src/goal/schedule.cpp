#include "goalnet/goal/schedule.hpp"

#include <algorithm>

namespace goalnet::goal {

std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::Send: return "send";
    case TaskKind::Recv: return "recv";
    case TaskKind::Calc: return "calc";
    }
    return "?";
}

Task Task::calc(TimeNs duration, std::uint16_t cpu) {
    Task t;
    t.kind = TaskKind::Calc;
    t.duration_ns = duration;
    t.cpu = cpu;
    return t;
}

Task Task::send(Bytes bytes, Rank to, Tag tag, std::uint16_t cpu, std::uint16_t nic) {
    Task t;
    t.kind = TaskKind::Send;
    t.bytes = bytes;
    t.peer = to;
    t.tag = tag;
    t.cpu = cpu;
    t.nic = nic;
    return t;
}

Task Task::recv(Bytes bytes, Rank from, Tag tag, std::uint16_t cpu, std::uint16_t nic) {
    Task t = send(bytes, from, tag, cpu, nic);
    t.kind = TaskKind::Recv;
    return t;
}

bool Task::same_shape(const Task& o) const {
    return kind == o.kind && bytes == o.bytes && peer == o.peer && tag == o.tag &&
           duration_ns == o.duration_ns && cpu == o.cpu && nic == o.nic;
}

void RankSchedule::canonicalize() {
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
}

namespace {

bool same_dep_set(const std::vector<Dep>& a, const std::vector<Dep>& b) {
    if (std::is_sorted(a.begin(), a.end()) && std::is_sorted(b.begin(), b.end()) &&
        std::adjacent_find(a.begin(), a.end()) == a.end() && std::adjacent_find(b.begin(), b.end()) == b.end())
        return a == b;
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    return sa == sb;
}

} // namespace

bool RankSchedule::operator==(const RankSchedule& o) const {
    return rank == o.rank && job_id == o.job_id && tasks == o.tasks && same_dep_set(deps, o.deps);
}

bool RankSchedule::same_shape(const RankSchedule& o) const {
    if (rank != o.rank || job_id != o.job_id || tasks.size() != o.tasks.size())
        return false;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (!tasks[i].same_shape(o.tasks[i]))
            return false;
    return same_dep_set(deps, o.deps);
}

GoalSchedule::GoalSchedule(std::size_t num_ranks) : ranks(num_ranks) {
    for (std::size_t r = 0; r < num_ranks; ++r)
        ranks[r].rank = static_cast<Rank>(r);
}

std::size_t GoalSchedule::task_count() const {
    std::size_t n = 0;
    for (const auto& r : ranks)
        n += r.tasks.size();
    return n;
}

std::size_t GoalSchedule::dep_count() const {
    std::size_t n = 0;
    for (const auto& r : ranks)
        n += r.deps.size();
    return n;
}

void GoalSchedule::canonicalize() {
    for (auto& r : ranks)
        r.canonicalize();
}

bool GoalSchedule::same_shape(const GoalSchedule& o) const {
    if (ranks.size() != o.ranks.size())
        return false;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (!ranks[i].same_shape(o.ranks[i]))
            return false;
    return true;
}

RankGraph::RankGraph(const RankSchedule& rs) : succ(rs.tasks.size()), pred(rs.tasks.size()) {
    for (const auto& d : rs.deps) {
        if (d.before >= rs.tasks.size() || d.after >= rs.tasks.size())
            continue;
        succ[d.before].push_back(d.after);
        pred[d.after].push_back(d.before);
    }
}

std::vector<TaskId> RankGraph::roots() const {
    std::vector<TaskId> out;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i].empty())
            out.push_back(static_cast<TaskId>(i));
    return out;
}

std::vector<TaskId> RankGraph::sinks() const {
    std::vector<TaskId> out;
    for (std::size_t i = 0; i < succ.size(); ++i)
        if (succ[i].empty())
            out.push_back(static_cast<TaskId>(i));
    return out;
}

} // namespace goalnet::goal
