#include "goalnet/goal/transform.hpp"

#include <string>
#include <unordered_set>

namespace goalnet::goal {

std::vector<TaskId> splice(RankSchedule& rs, const Fragment& f, const std::vector<TaskId>& preds) {
    if (f.tasks.empty())
        return preds;
    const auto base = static_cast<TaskId>(rs.tasks.size());
    std::vector<bool> has_pred(f.tasks.size(), false), has_succ(f.tasks.size(), false);
    for (const auto& d : f.deps) {
        rs.deps.push_back({base + d.before, base + d.after});
        has_pred[d.after] = true;
        has_succ[d.before] = true;
    }
    for (const auto& t : f.tasks)
        rs.tasks.push_back(t);
    std::vector<TaskId> sinks;
    for (TaskId i = 0; i < f.tasks.size(); ++i) {
        if (!has_pred[i])
            for (TaskId p : preds)
                rs.deps.push_back({p, base + i});
        if (!has_succ[i])
            sinks.push_back(base + i);
    }
    return sinks;
}

namespace {

void check_mapping(const std::vector<Rank>& mapping, std::size_t source_ranks, std::size_t target_ranks,
                   const std::string& what) {
    if (mapping.size() != source_ranks)
        throw InvalidArgument(what + ": mapping has " + std::to_string(mapping.size()) + " entries for " +
                              std::to_string(source_ranks) + " ranks");
    std::vector<bool> used(target_ranks, false);
    for (std::size_t r = 0; r < mapping.size(); ++r) {
        if (mapping[r] >= target_ranks)
            throw InvalidArgument(what + ": rank " + std::to_string(r) + " mapped to " + std::to_string(mapping[r]) +
                                  ", outside [0, " + std::to_string(target_ranks) + ")");
        if (used[mapping[r]])
            throw InvalidArgument(what + ": mapping is not injective (target " + std::to_string(mapping[r]) + ")");
        used[mapping[r]] = true;
    }
}

Rank map_peer(const std::vector<Rank>& mapping, Rank peer, const std::string& what) {
    if (peer >= mapping.size())
        throw InvalidArgument(what + ": peer " + std::to_string(peer) + " has no target rank");
    return mapping[peer];
}

} // namespace

GoalSchedule remap_ranks(const GoalSchedule& s, const std::vector<Rank>& mapping, std::size_t new_num_ranks) {
    check_mapping(mapping, s.num_ranks(), new_num_ranks, "remap_ranks");
    GoalSchedule out(new_num_ranks);
    for (const auto& rs : s.ranks) {
        RankSchedule& dst = out.ranks[mapping[rs.rank]];
        Rank new_rank = dst.rank;
        dst = rs;
        dst.rank = new_rank;
        for (auto& t : dst.tasks)
            if (t.is_comm())
                t.peer = map_peer(mapping, t.peer, "remap_ranks");
    }
    return out;
}

GoalSchedule merge_tenants(const std::vector<TenantPart>& parts, std::size_t target_num_ranks) {
    // (part index, source rank) per target rank, in part order
    std::vector<std::vector<std::pair<std::size_t, Rank>>> landing(target_num_ranks);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto& part = parts[p];
        check_mapping(part.mapping, part.schedule.num_ranks(), target_num_ranks,
                      "merge_tenants part " + std::to_string(p));
        for (Rank r = 0; r < part.mapping.size(); ++r)
            landing[part.mapping[r]].push_back({p, r});
    }
    std::vector<bool> shifted(parts.size(), false);
    for (const auto& l : landing)
        if (l.size() >= 2)
            for (const auto& [p, r] : l)
                shifted[p] = p != 0;

    GoalSchedule out(target_num_ranks);
    for (std::size_t target = 0; target < target_num_ranks; ++target) {
        RankSchedule& dst = out.ranks[target];
        std::vector<std::pair<std::size_t, Rank>> nonempty;
        for (const auto& pr : landing[target])
            if (!parts[pr.first].schedule[pr.second].tasks.empty())
                nonempty.push_back(pr);
        if (!landing[target].empty()) {
            const auto& [p0, r0] = landing[target].front();
            dst.job_id = parts[p0].schedule[r0].job_id;
        }
        const bool colocated = nonempty.size() >= 2;
        std::unordered_set<std::string> labels;
        auto unique_label = [&](const std::string& want, std::size_t part) {
            if (want.empty())
                return want;
            std::string l = want;
            if (!labels.insert(l).second) {
                l = want + ".p" + std::to_string(part);
                while (!labels.insert(l).second)
                    l += "_";
            }
            return l;
        };
        TaskId root = 0;
        if (colocated) {
            Task t = Task::calc(0);
            t.label = unique_label("merge_root", 0);
            root = dst.add(std::move(t));
        }
        std::vector<TaskId> sinks;
        for (const auto& [p, r] : nonempty) {
            const auto& part = parts[p];
            const RankSchedule& src = part.schedule[r];
            const std::string what = "merge_tenants part " + std::to_string(p);
            Fragment f;
            f.tasks = src.tasks;
            f.deps = src.deps;
            for (auto& t : f.tasks) {
                t.label = unique_label(t.label, p);
                if (!t.is_comm())
                    continue;
                t.peer = map_peer(part.mapping, t.peer, what);
                if (shifted[p]) {
                    if (t.tag >= (Tag{1} << kTenantTagShift))
                        throw InvalidArgument(what + ": tag " + std::to_string(t.tag) +
                                              " too large to isolate a co-located tenant");
                    t.tag += static_cast<Tag>(p) << kTenantTagShift;
                }
            }
            auto part_sinks = splice(dst, f, colocated ? std::vector<TaskId>{root} : std::vector<TaskId>{});
            sinks.insert(sinks.end(), part_sinks.begin(), part_sinks.end());
        }
        if (colocated) {
            Task t = Task::calc(0);
            t.label = unique_label("merge_sink", 0);
            TaskId sink = dst.add(std::move(t));
            for (TaskId s : sinks)
                dst.require(sink, s);
        }
        dst.canonicalize();
    }
    return out;
}

} // namespace goalnet::goal
