#include "goalnet/goal/validate.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>
#include <tuple>

namespace goalnet::goal {

std::optional<std::vector<TaskId>> find_cycle(const RankSchedule& rs) {
    const std::size_t n = rs.tasks.size();
    RankGraph g(rs);
    for (auto& s : g.succ)
        std::sort(s.begin(), s.end());
    enum : std::uint8_t { White, Grey, Black };
    std::vector<std::uint8_t> color(n, White);
    std::vector<TaskId> parent(n, 0);
    // (node, next successor index)
    std::vector<std::pair<TaskId, std::size_t>> stack;
    for (TaskId start = 0; start < n; ++start) {
        if (color[start] != White)
            continue;
        stack.push_back({start, 0});
        color[start] = Grey;
        while (!stack.empty()) {
            auto& [u, idx] = stack.back();
            if (idx < g.succ[u].size()) {
                TaskId v = g.succ[u][idx++];
                if (color[v] == White) {
                    color[v] = Grey;
                    parent[v] = u;
                    stack.push_back({v, 0});
                } else if (color[v] == Grey) {
                    std::vector<TaskId> path;
                    for (TaskId w = u; w != v; w = parent[w])
                        path.push_back(w);
                    path.push_back(v);
                    std::reverse(path.begin(), path.end());
                    path.push_back(v);
                    return path;
                }
            } else {
                color[u] = Black;
                stack.pop_back();
            }
        }
    }
    return std::nullopt;
}

std::optional<std::vector<TaskId>> topo_order(const RankSchedule& rs) {
    const std::size_t n = rs.tasks.size();
    RankGraph g(rs);
    std::vector<std::size_t> indeg(n);
    for (std::size_t i = 0; i < n; ++i)
        indeg[i] = g.pred[i].size();
    std::vector<TaskId> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0)
            order.push_back(static_cast<TaskId>(i));
    for (std::size_t head = 0; head < order.size(); ++head)
        for (TaskId v : g.succ[order[head]])
            if (--indeg[v] == 0)
                order.push_back(v);
    if (order.size() != n)
        return std::nullopt;
    return order;
}

namespace {

using ChannelKey = std::tuple<Rank, Rank, Tag>; // src, dst, tag

// Runs the schedule with synchronous send/recv pairing and no timing. Any task
// left over can never complete on a backend either.
std::vector<ValidationReport::TaskRef> find_stalled(const GoalSchedule& s) {
    struct Node {
        std::vector<std::size_t> indeg;
        RankGraph graph;
        std::vector<bool> done;
    };
    std::vector<Node> nodes;
    nodes.reserve(s.num_ranks());
    std::deque<ValidationReport::TaskRef> work;
    for (const auto& rs : s.ranks) {
        RankGraph g(rs);
        std::vector<std::size_t> indeg(rs.tasks.size());
        for (std::size_t i = 0; i < indeg.size(); ++i) {
            indeg[i] = g.pred[i].size();
            if (indeg[i] == 0)
                work.push_back({rs.rank, static_cast<TaskId>(i)});
        }
        nodes.push_back({std::move(indeg), std::move(g), std::vector<bool>(rs.tasks.size(), false)});
    }
    std::map<ChannelKey, std::pair<std::deque<TaskId>, std::deque<TaskId>>> channels;
    auto complete = [&](Rank r, TaskId t) {
        nodes[r].done[t] = true;
        for (TaskId v : nodes[r].graph.succ[t])
            if (--nodes[r].indeg[v] == 0)
                work.push_back({r, v});
    };
    while (!work.empty()) {
        auto [r, t] = work.front();
        work.pop_front();
        const Task& task = s.ranks[r].tasks[t];
        if (task.kind == TaskKind::Calc) {
            complete(r, t);
        } else if (task.kind == TaskKind::Send) {
            auto& ch = channels[{r, task.peer, task.tag}];
            if (!ch.second.empty()) {
                TaskId rv = ch.second.front();
                ch.second.pop_front();
                complete(r, t);
                complete(task.peer, rv);
            } else {
                ch.first.push_back(t);
            }
        } else {
            auto& ch = channels[{task.peer, r, task.tag}];
            if (!ch.first.empty()) {
                TaskId sd = ch.first.front();
                ch.first.pop_front();
                complete(task.peer, sd);
                complete(r, t);
            } else {
                ch.second.push_back(t);
            }
        }
    }
    std::vector<ValidationReport::TaskRef> stalled;
    for (const auto& rs : s.ranks)
        for (TaskId t = 0; t < rs.tasks.size(); ++t)
            if (!nodes[rs.rank].done[t])
                stalled.push_back({rs.rank, t});
    return stalled;
}

} // namespace

ValidationReport validate(const GoalSchedule& s) {
    ValidationReport rep;
    const std::size_t nranks = s.num_ranks();
    std::map<ChannelKey, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t r = 0; r < nranks; ++r) {
        const RankSchedule& rs = s.ranks[r];
        bool dangling = false;
        for (const auto& d : rs.deps) {
            if (d.before >= rs.tasks.size() || d.after >= rs.tasks.size()) {
                rep.dangling_deps.push_back({rs.rank, d});
                dangling = true;
            }
        }
        if (!dangling)
            if (auto cyc = find_cycle(rs))
                rep.cycles.push_back({rs.rank, std::move(*cyc)});
        for (TaskId t = 0; t < rs.tasks.size(); ++t) {
            const Task& task = rs.tasks[t];
            if (!task.is_comm())
                continue;
            if (task.peer >= nranks) {
                rep.peer_out_of_range.push_back({rs.rank, t});
                continue;
            }
            if (task.peer == rs.rank) {
                rep.self_sends.push_back({rs.rank, t});
                continue;
            }
            if (task.kind == TaskKind::Send)
                ++counts[{rs.rank, task.peer, task.tag}].first;
            else
                ++counts[{task.peer, rs.rank, task.tag}].second;
        }
    }
    for (const auto& [key, c] : counts)
        if (c.first != c.second)
            rep.mismatches.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), c.first, c.second});
    if (rep.empty())
        rep.stalled = find_stalled(s);
    return rep;
}

std::string ValidationReport::to_string(const GoalSchedule* s) const {
    auto name = [&](Rank r, TaskId t) {
        std::string out = std::to_string(r) + ":" + std::to_string(t);
        if (s && r < s->num_ranks() && t < (*s)[r].tasks.size() && !(*s)[r].tasks[t].label.empty())
            out += "(" + (*s)[r].tasks[t].label + ")";
        return out;
    };
    std::ostringstream os;
    for (const auto& c : cycles) {
        os << "cycle in rank " << c.rank << ":";
        for (TaskId t : c.witness)
            os << ' ' << name(c.rank, t);
        os << '\n';
    }
    for (const auto& d : dangling_deps)
        os << "rank " << d.rank << ": dependency " << d.dep.before << " -> " << d.dep.after
           << " references a missing task\n";
    for (const auto& t : peer_out_of_range)
        os << "task " << name(t.rank, t.task) << ": peer out of range\n";
    for (const auto& t : self_sends)
        os << "task " << name(t.rank, t.task) << ": communicates with its own rank\n";
    for (const auto& m : mismatches)
        os << "channel " << m.src << " -> " << m.dst << " tag " << m.tag << ": " << m.sends << " sends, " << m.recvs
           << " recvs\n";
    for (const auto& t : stalled)
        os << "task " << name(t.rank, t.task) << ": can never become runnable\n";
    return os.str();
}

} // namespace goalnet::goal
