#include "goalnet/storage/storage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <fstream>
#include <sstream>

namespace goalnet::storage {

using goal::GoalSchedule;
using goal::Task;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

template <typename T>
bool to_uint(std::string_view s, T& out) {
    if (s.empty() || s.front() == '-' || s.front() == '+')
        return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

} // namespace

TimeNs parse_seconds(std::string_view s) {
    s = trim(s);
    const auto dot = s.find('.');
    std::string_view whole = s.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (whole.empty() && frac.empty())
        throw InvalidArgument("empty timestamp");
    auto digits = [](std::string_view d) { return std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; }); };
    if (!digits(whole) || !digits(frac))
        throw InvalidArgument("bad timestamp '" + std::string(s) + "'");
    std::int64_t sec = 0;
    if (!whole.empty() && !to_uint(whole, sec))
        throw InvalidArgument("timestamp out of range '" + std::string(s) + "'");
    if (sec > std::numeric_limits<TimeNs>::max() / 1000000000 - 1)
        throw InvalidArgument("timestamp out of range '" + std::string(s) + "'");
    std::int64_t ns = 0;
    for (std::size_t i = 0; i < 9; ++i)
        ns = ns * 10 + (i < frac.size() ? frac[i] - '0' : 0);
    if (frac.size() > 9 && frac[9] >= '5')
        ++ns;
    return sec * 1000000000 + ns;
}

std::vector<IoRequest> parse_spc_trace(std::string_view text) {
    std::vector<IoRequest> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string_view> f;
        for (std::size_t start = 0;;) {
            const auto comma = line.find(',', start);
            f.push_back(trim(line.substr(start, comma - start)));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (f.size() != 5)
            throw ParseError("expected 5 fields (asu,lba,bytes,opcode,timestamp), got " + std::to_string(f.size()), line_no, 1);
        IoRequest r;
        if (!to_uint(f[0], r.asu))
            throw ParseError("bad ASU '" + std::string(f[0]) + "'", line_no, 1);
        if (!to_uint(f[1], r.lba))
            throw ParseError("bad LBA '" + std::string(f[1]) + "'", line_no, 1);
        if (!f[2].empty() && f[2].front() == '-')
            throw ParseError("negative request size", line_no, 1);
        if (!to_uint(f[2], r.bytes) || r.bytes == 0)
            throw ParseError("bad request size '" + std::string(f[2]) + "'", line_no, 1);
        if (f[3] == "r" || f[3] == "R")
            r.op = IoOp::Read;
        else if (f[3] == "w" || f[3] == "W")
            r.op = IoOp::Write;
        else
            throw ParseError("unknown opcode '" + std::string(f[3]) + "'", line_no, 1);
        try {
            r.t_ns = parse_seconds(f[4]);
        } catch (const InvalidArgument& e) {
            throw ParseError(e.what(), line_no, 1);
        }
        out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const IoRequest& a, const IoRequest& b) { return a.t_ns < b.t_ns; });
    return out;
}

std::vector<IoRequest> parse_spc_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error("io", "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spc_trace(ss.str());
}

std::string emit_spc_trace(const std::vector<IoRequest>& reqs) {
    std::string out;
    char frac[16];
    for (const auto& r : reqs) {
        std::snprintf(frac, sizeof frac, "%09lld", static_cast<long long>(r.t_ns % 1000000000));
        out += std::to_string(r.asu) + "," + std::to_string(r.lba) + "," + std::to_string(r.bytes) + "," +
               (r.op == IoOp::Read ? "r" : "w") + "," + std::to_string(r.t_ns / 1000000000) + "." + frac + "\n";
    }
    return out;
}

std::vector<IoRequest> synth_financial_trace(const SyntheticTraceOptions& o) {
    if (o.asus == 0)
        throw InvalidArgument("synthetic trace needs at least one ASU");
    Rng rng(o.seed);
    std::vector<IoRequest> out;
    out.reserve(o.requests);
    double t_us = 0;
    for (std::size_t i = 0; i < o.requests; ++i) {
        IoRequest r;
        // a few hot ASUs take most traffic
        r.asu = rng.uniform() < 0.6 ? rng.below(std::max<std::uint64_t>(1, o.asus / 4)) : rng.below(o.asus);
        r.lba = rng.below(1ULL << 24) * 8;
        const double u = rng.uniform();
        const Bytes sectors = u < 0.5 ? 1 : u < 0.8 ? 8 : u < 0.95 ? 16 : 8 * (1 + rng.below(32));
        r.bytes = sectors * 512;
        r.op = rng.uniform() < o.write_fraction ? IoOp::Write : IoOp::Read;
        r.t_ns = static_cast<TimeNs>(std::llround(t_us)) * 1000;
        out.push_back(r);
        t_us += -std::log(1.0 - rng.uniform()) * o.mean_interarrival_us;
    }
    return out;
}

void StorageCluster::check() const {
    if (hosts == 0)
        throw InvalidArgument("storage cluster needs at least one host");
    if (ccs == 0)
        throw InvalidArgument("storage cluster needs at least one CCS");
    if (bss == 0)
        throw InvalidArgument("storage cluster needs at least one BSS");
    if (replication == 0 || replication > bss)
        throw InvalidArgument("replication factor " + std::to_string(replication) + " must be in [1, " +
                              std::to_string(bss) + "]");
    if (via_slb && slb == 0)
        throw InvalidArgument("SLB hop requested but the cluster has no SLB");
    if (via_gs && gs == 0)
        throw InvalidArgument("GS hop requested but the cluster has no GS");
    if (stripe_blocks == 0)
        throw InvalidArgument("stripe size must be positive");
    if (service_ns < 0)
        throw InvalidArgument("service time must be non-negative");
    const std::uint64_t total = std::uint64_t{hosts} + ccs + bss + mds + gs + slb;
    if (total > std::numeric_limits<Rank>::max())
        throw InvalidArgument("storage cluster has too many ranks");
}

std::size_t StorageCluster::num_ranks() const {
    return std::size_t{hosts} + ccs + bss + mds + gs + slb;
}

std::vector<Rank> StorageCluster::replicas(const IoRequest& r, std::uint32_t count) const {
    std::uint32_t primary;
    if (placement) {
        primary = placement(r.asu, r.lba);
        if (primary >= bss)
            throw InvalidArgument("placement put ASU " + std::to_string(r.asu) + " LBA " + std::to_string(r.lba) +
                                  " on BSS " + std::to_string(primary) + ", but there are only " + std::to_string(bss));
    } else {
        primary = static_cast<std::uint32_t>(mix_hash(mix_hash(seed, r.asu), r.lba / stripe_blocks) % bss);
    }
    std::vector<Rank> out;
    for (std::uint32_t k = 0; k < count; ++k)
        out.push_back(bss_rank((primary + k) % bss));
    return out;
}

GoalSchedule gen_direct_drive(const std::vector<IoRequest>& reqs, const StorageCluster& c) {
    c.check();
    if (reqs.size() > std::numeric_limits<Tag>::max())
        throw InvalidArgument("too many requests for distinct tags");
    GoalSchedule s(c.num_ranks());
    TimeNs t0 = reqs.empty() ? 0 : reqs.front().t_ns;
    for (const auto& r : reqs)
        t0 = std::min(t0, r.t_ns);

    struct HostState {
        std::optional<TaskId> clock; // open loop: last timeline calc
        TimeNs clock_at = 0;
        std::vector<TaskId> done;    // closed loop: previous request's final tasks
    };
    std::vector<HostState> hosts(c.hosts);
    const Bytes ctl = c.control_bytes;

    // one service stage: recv from `from`, compute, then the caller sends on
    auto serve = [&](Rank at, Rank from, Bytes in_bytes, Tag tag) {
        auto& rs = s[at];
        TaskId rcv = rs.add(Task::recv(in_bytes, from, tag));
        TaskId work = rs.add(Task::calc(c.service_ns));
        rs.require(work, rcv);
        return work;
    };
    auto reply = [&](Rank at, TaskId after, Bytes b, Rank to, Tag tag) {
        auto& rs = s[at];
        TaskId snd = rs.add(Task::send(b, to, tag));
        rs.require(snd, after);
    };

    for (std::size_t idx = 0; idx < reqs.size(); ++idx) {
        const IoRequest& r = reqs[idx];
        if (r.bytes == 0)
            throw InvalidArgument("request " + std::to_string(idx) + " has zero size");
        const Tag tag = static_cast<Tag>(idx);
        const Rank h = c.host_of(r);
        auto& hs = hosts[h];
        auto& hr = s[h];
        const Rank ccs = c.ccs_rank(static_cast<std::uint32_t>(mix_hash(c.seed ^ 0x5bd1e995, r.asu) % c.ccs));

        // gate: what the request's first task waits on
        std::vector<TaskId> gate;
        if (c.closed_loop) {
            gate = hs.done;
        } else {
            const TimeNs at = r.t_ns - t0;
            TaskId tick = hr.add(Task::calc(at - hs.clock_at, 1));
            if (hs.clock)
                hr.require(tick, *hs.clock);
            hs.clock = tick;
            hs.clock_at = at;
            gate = {tick};
        }

        // control path to the CCS, optionally via SLB and GS
        std::vector<Rank> path;
        if (c.via_slb)
            path.push_back(c.slb_rank(static_cast<std::uint32_t>(idx % c.slb)));
        if (c.via_gs)
            path.push_back(c.gs_rank(static_cast<std::uint32_t>(idx % c.gs)));
        path.push_back(ccs);
        TaskId first = hr.add(Task::send(ctl, path[0], tag));
        for (TaskId g : gate)
            hr.require(first, g);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            const Rank from = k == 0 ? h : path[k - 1];
            TaskId w = serve(path[k], from, ctl, tag);
            reply(path[k], w, ctl, path[k + 1], tag);
        }
        TaskId cw = serve(ccs, path.size() > 1 ? path[path.size() - 2] : h, ctl, tag);
        reply(ccs, cw, ctl, h, tag);
        TaskId got = hr.add(Task::recv(ctl, ccs, tag));
        hr.require(got, first);

        std::vector<TaskId> finals;
        if (r.op == IoOp::Read) {
            const Rank b = c.replicas(r, 1)[0];
            TaskId req = hr.add(Task::send(ctl, b, tag));
            hr.require(req, got);
            TaskId w = serve(b, h, ctl, tag);
            reply(b, w, r.bytes, h, tag);
            TaskId data = hr.add(Task::recv(r.bytes, b, tag));
            hr.require(data, req);
            finals.push_back(data);
        } else {
            for (Rank b : c.replicas(r, c.replication)) {
                TaskId put = hr.add(Task::send(r.bytes, b, tag));
                hr.require(put, got);
                TaskId w = serve(b, h, r.bytes, tag);
                reply(b, w, ctl, h, tag);
                TaskId ack = hr.add(Task::recv(ctl, b, tag));
                hr.require(ack, put);
                finals.push_back(ack);
            }
        }
        hs.done = std::move(finals);
    }
    s.canonicalize();
    return s;
}

} // namespace goalnet::storage
