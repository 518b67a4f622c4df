#include "goalnet/schedgen/mpi_trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace goalnet::schedgen {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

template <typename T>
T number(std::string_view s, const std::string& where, const char* what) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(where + ": bad " + what + " '" + std::string(s) + "'");
    return v;
}

std::string comm_key(const std::vector<Rank>& comm) {
    std::string k;
    for (std::size_t i = 0; i < comm.size(); ++i)
        k += (i ? "-" : "") + std::to_string(comm[i]);
    return k;
}

MpiTraceEvent parse_line(std::string_view line, Rank rank, const std::string& where) {
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        f.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    if (f.size() != 6)
        throw ParseError(where + ": expected 6 comma-separated fields, got " + std::to_string(f.size()));
    MpiTraceEvent e;
    e.rank = rank;
    try {
        e.op = parse_op(f[0]);
    } catch (const InvalidArgument& ex) {
        throw ParseError(where + ": " + ex.what());
    }
    e.bytes = number<Bytes>(f[1], where, "byte count");
    const bool p2p = !is_collective(e.op);
    if (p2p || e.op == MpiOp::Bcast) {
        const Rank v = number<Rank>(f[2], where, p2p ? "peer" : "root");
        (p2p ? e.peer : e.root) = v;
    } else if (f[2] != "-") {
        throw ParseError(where + ": " + std::string(to_string(e.op)) + " takes no peer or root");
    }
    if (p2p) {
        if (f[3] != "-")
            throw ParseError(where + ": point-to-point operations take no communicator");
    } else {
        if (f[3].empty() || f[3] == "-")
            throw ParseError(where + ": collective without a communicator");
        std::size_t s = 0;
        for (;;) {
            auto dash = f[3].find('-', s);
            e.comm.push_back(number<Rank>(f[3].substr(s, dash - s), where, "communicator rank"));
            if (dash == std::string_view::npos)
                break;
            s = dash + 1;
        }
    }
    e.tstart_ns = number<TimeNs>(f[4], where, "start time");
    e.tend_ns = number<TimeNs>(f[5], where, "end time");
    if (e.tstart_ns < 0 || e.tend_ns < e.tstart_ns)
        throw ParseError(where + ": end time precedes start time");
    return e;
}

void cross_check(const MpiTrace& trace) {
    const std::size_t n = trace.size();
    // (comm key) -> per member rank: sequence of (op, bytes, root)
    struct Seq {
        std::vector<Rank> comm;
        std::map<Rank, std::vector<const MpiTraceEvent*>> by_rank;
    };
    std::map<std::string, Seq> comms;
    std::map<std::pair<Rank, Rank>, std::pair<std::size_t, std::size_t>> p2p;
    for (const auto& events : trace) {
        for (const auto& e : events) {
            if (!is_collective(e.op)) {
                if (e.peer >= n || e.peer == e.rank)
                    throw ParseError("rank " + std::to_string(e.rank) + ": " + std::string(to_string(e.op)) +
                                     " with invalid peer " + std::to_string(e.peer));
                if (e.op == MpiOp::Send)
                    ++p2p[{e.rank, e.peer}].first;
                else
                    ++p2p[{e.peer, e.rank}].second;
                continue;
            }
            for (Rank m : e.comm)
                if (m >= n)
                    throw ParseError("rank " + std::to_string(e.rank) + ": communicator " + comm_key(e.comm) +
                                     " names rank " + std::to_string(m) + " but only " + std::to_string(n) +
                                     " trace files were given");
            if (std::find(e.comm.begin(), e.comm.end(), e.rank) == e.comm.end())
                throw ParseError("rank " + std::to_string(e.rank) + " logged " + std::string(to_string(e.op)) +
                                 " on communicator " + comm_key(e.comm) + " that does not include it");
            auto& seq = comms[comm_key(e.comm)];
            seq.comm = e.comm;
            seq.by_rank[e.rank].push_back(&e);
        }
    }
    for (const auto& [key, seq] : comms) {
        const Rank first = seq.by_rank.begin()->first;
        const auto& ref = seq.by_rank.begin()->second;
        for (Rank m : seq.comm) {
            auto it = seq.by_rank.find(m);
            const std::size_t have = it == seq.by_rank.end() ? 0 : it->second.size();
            if (have != ref.size()) {
                std::ostringstream os;
                os << "communicator mismatch: rank " << first << " logged " << ref.size()
                   << " collective(s) on comm " << key << " but rank " << m << " logged " << have;
                if (have < ref.size() && m < trace.size()) {
                    // name the comm the other rank used instead, if any
                    for (const auto& e : trace[m])
                        if (is_collective(e.op) && e.op == ref[have]->op && comm_key(e.comm) != key) {
                            os << " (rank " << m << " used comm " << comm_key(e.comm) << ")";
                            break;
                        }
                }
                throw ParseError(os.str());
            }
            for (std::size_t k = 0; k < have; ++k) {
                const auto* a = ref[k];
                const auto* b = it->second[k];
                if (a->op != b->op || a->bytes != b->bytes || (a->op == MpiOp::Bcast && a->root != b->root))
                    throw ParseError("collective #" + std::to_string(k) + " on comm " + key + ": rank " +
                                     std::to_string(first) + " logged " + std::string(to_string(a->op)) + "(" +
                                     std::to_string(a->bytes) + " B) but rank " + std::to_string(m) + " logged " +
                                     std::string(to_string(b->op)) + "(" + std::to_string(b->bytes) + " B)");
            }
        }
    }
    for (const auto& [k, c] : p2p)
        if (c.first != c.second)
            throw ParseError("unpaired point-to-point traffic " + std::to_string(k.first) + " -> " +
                             std::to_string(k.second) + ": " + std::to_string(c.first) + " SEND vs " +
                             std::to_string(c.second) + " RECV");
}

} // namespace

MpiTrace parse_mpi_trace(const std::vector<std::string>& per_rank_csv) {
    MpiTrace trace(per_rank_csv.size());
    for (std::size_t r = 0; r < per_rank_csv.size(); ++r) {
        std::string_view text = per_rank_csv[r];
        std::size_t lineno = 0, pos = 0;
        TimeNs last_start = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            std::string_view line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++lineno;
            if (line.empty() || line.front() == '#')
                continue;
            if (line.size() >= 3 && (line.substr(0, 3) == "op," || line.substr(0, 3) == "OP,"))
                continue;
            const std::string where = "rank " + std::to_string(r) + " line " + std::to_string(lineno);
            MpiTraceEvent e = parse_line(line, static_cast<Rank>(r), where);
            if (!trace[r].empty() && e.tstart_ns < last_start)
                throw ParseError(where + ": start time " + std::to_string(e.tstart_ns) + " is earlier than " +
                                 std::to_string(last_start) + " of the previous event");
            last_start = e.tstart_ns;
            trace[r].push_back(std::move(e));
        }
    }
    cross_check(trace);
    return trace;
}

MpiTrace parse_mpi_trace_files(const std::vector<std::filesystem::path>& files) {
    std::vector<std::string> texts;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in)
            throw Error("io", "cannot open " + f.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        texts.push_back(ss.str());
    }
    return parse_mpi_trace(texts);
}

Algo AlgoSelection::for_op(MpiOp op) const {
    switch (op) {
    case MpiOp::Allreduce: return allreduce;
    case MpiOp::Bcast: return bcast;
    case MpiOp::ReduceScatter: return reduce_scatter;
    case MpiOp::Allgather: return allgather;
    case MpiOp::Alltoall: return alltoall;
    case MpiOp::Barrier: return barrier;
    default: throw InvalidArgument("no algorithm for point-to-point operations");
    }
}

goal::GoalSchedule trace_to_goal(const MpiTrace& trace, const AlgoSelection& algos) {
    const std::size_t n = trace.size();
    // Number collective instances globally: k-th collective on comm C, over
    // sorted (C, k). Each rank then finds its fragment by the same key.
    std::map<std::pair<std::string, std::size_t>, const MpiTraceEvent*> instances;
    std::vector<std::vector<std::pair<std::string, std::size_t>>> keys(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::map<std::string, std::size_t> seen;
        for (const auto& e : trace[r]) {
            if (!is_collective(e.op)) {
                keys[r].push_back({});
                continue;
            }
            std::string k = comm_key(e.comm);
            std::size_t idx = seen[k]++;
            keys[r].push_back({k, idx});
            instances.emplace(std::make_pair(k, idx), &e);
        }
    }
    std::map<std::pair<std::string, std::size_t>, std::vector<goal::Fragment>> fragments;
    std::map<std::pair<std::string, std::size_t>, Tag> tags;
    Tag next = kCollectiveTagBase;
    for (const auto& [key, e] : instances) {
        tags[key] = next;
        fragments[key] = expand_collective(e->op, e->comm, e->bytes, algos.for_op(e->op), next++, e->root,
                                           algos.options);
    }

    goal::GoalSchedule s(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto& rs = s.ranks[r];
        std::vector<TaskId> tail;
        for (std::size_t i = 0; i < trace[r].size(); ++i) {
            const auto& e = trace[r][i];
            if (i > 0) {
                const TimeNs gap = std::max<TimeNs>(0, e.tstart_ns - trace[r][i - 1].tend_ns);
                goal::Fragment bridge;
                bridge.add(goal::Task::calc(gap));
                tail = goal::splice(rs, bridge, tail);
            }
            goal::Fragment f;
            if (e.op == MpiOp::Send) {
                f.add(goal::Task::send(e.bytes, e.peer, 0));
            } else if (e.op == MpiOp::Recv) {
                f.add(goal::Task::recv(e.bytes, e.peer, 0));
            } else {
                const auto& key = keys[r][i];
                const auto pos = static_cast<std::size_t>(std::find(e.comm.begin(), e.comm.end(), r) - e.comm.begin());
                f = fragments.at(key)[pos];
            }
            tail = goal::splice(rs, f, tail);
        }
        rs.canonicalize();
    }
    return s;
}

} // namespace goalnet::schedgen
