#include "goalnet/sim/stats.hpp"

#include <algorithm>

namespace goalnet::sim {

TimeNs nearest_rank(const std::vector<TimeNs>& sorted, unsigned pct) {
    if (sorted.empty())
        return 0;
    const std::size_t n = sorted.size();
    std::size_t rank = (static_cast<std::size_t>(pct) * n + 99) / 100; // ceil(pct * n / 100)
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

MctSummary summarize_mct(std::vector<TimeNs> samples) {
    MctSummary m;
    if (samples.empty())
        return m;
    std::sort(samples.begin(), samples.end());
    m.count = samples.size();
    long double sum = 0;
    for (TimeNs v : samples)
        sum += v;
    m.mean = static_cast<double>(sum / static_cast<long double>(samples.size()));
    m.p50 = nearest_rank(samples, 50);
    m.p99 = nearest_rank(samples, 99);
    m.max = samples.back();
    return m;
}

StatsReport compute_stats(const goal::GoalSchedule& s, const std::vector<std::vector<TaskTiming>>& timing,
                          std::vector<MessageRecord> messages, BackendStats backend) {
    StatsReport rep;
    rep.ranks.resize(s.num_ranks());
    for (const auto& rs : s.ranks) {
        auto& rstat = rep.ranks[rs.rank];
        std::vector<std::pair<TimeNs, TimeNs>> calcs;
        for (TaskId t = 0; t < rs.tasks.size(); ++t) {
            const TimeNs done = timing[rs.rank][t].completed_ns;
            rstat.finish_ns = std::max(rstat.finish_ns, done);
            const auto& task = rs.tasks[t];
            if (task.kind == goal::TaskKind::Calc && task.duration_ns > 0)
                calcs.push_back({done - task.duration_ns, done});
        }
        std::sort(calcs.begin(), calcs.end());
        TimeNs covered_to = std::numeric_limits<TimeNs>::min();
        for (auto [a, b] : calcs) {
            a = std::max(a, covered_to);
            if (b > a) {
                rstat.busy_ns += b - a;
                covered_to = b;
            }
        }
        rep.makespan_ns = std::max(rep.makespan_ns, rstat.finish_ns);
        if (!rs.tasks.empty()) {
            auto [it, fresh] = rep.jobs.emplace(rs.job_id, rstat.finish_ns);
            if (!fresh)
                it->second = std::max(it->second, rstat.finish_ns);
        }
    }
    for (auto& r : rep.ranks)
        r.idle_ns = rep.makespan_ns - r.busy_ns;
    if (!messages.empty()) {
        std::vector<TimeNs> mct;
        mct.reserve(messages.size());
        for (const auto& m : messages)
            mct.push_back(m.delivered_ns - m.send_ready_ns);
        rep.mct = summarize_mct(std::move(mct));
    }
    std::sort(messages.begin(), messages.end(), [](const MessageRecord& a, const MessageRecord& b) {
        return a.send < b.send;
    });
    rep.messages = std::move(messages);
    rep.backend = std::move(backend);
    return rep;
}

} // namespace goalnet::sim
