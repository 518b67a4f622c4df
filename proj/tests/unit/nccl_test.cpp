#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "goalnet/goal/validate.hpp"
#include "goalnet/loggops/backend.hpp"
#include "goalnet/nccl/nccl.hpp"
#include "goalnet/sim/engine.hpp"

using namespace goalnet;
using namespace goalnet::nccl;
using goal::GoalSchedule;
using goal::RankGraph;
using goal::RankSchedule;
using goal::TaskKind;

namespace {

constexpr Bytes KiB = 1024;
constexpr Bytes MiB = 1024 * 1024;

GpuKernelEvent coll(GpuId gpu, NcclOp op, Bytes bytes, std::string comm, TimeNs ts, TimeNs te, GpuId root = 0) {
    GpuKernelEvent e;
    e.gpu = gpu;
    e.compute = false;
    e.op = op;
    e.bytes = bytes;
    e.comm = std::move(comm);
    e.root = root;
    e.ts = ts;
    e.te = te;
    return e;
}

GpuKernelEvent compute(GpuId gpu, TimeNs ts, TimeNs te) {
    GpuKernelEvent e;
    e.gpu = gpu;
    e.compute = true;
    e.ts = ts;
    e.te = te;
    return e;
}

void add(GpuTrace& t, const std::string& stream, GpuKernelEvent e) {
    e.stream = stream;
    auto& streams = t.gpus[e.gpu];
    auto it = std::find_if(streams.begin(), streams.end(), [&](const GpuStream& s) { return s.id == stream; });
    if (it == streams.end()) {
        streams.push_back({stream, {}});
        it = streams.end() - 1;
    }
    it->events.push_back(std::move(e));
}

// One collective on every member of `members`, stream "0".
GpuTrace single_collective(NcclOp op, std::vector<GpuId> members, Bytes bytes, GpuId root = 0) {
    GpuTrace t;
    t.communicators["world"] = members;
    for (GpuId g : members)
        add(t, "0", coll(g, op, bytes, "world", 0, 100, root));
    return t;
}

std::size_t count_kind(const RankSchedule& rs, TaskKind k) {
    return static_cast<std::size_t>(std::count_if(rs.tasks.begin(), rs.tasks.end(), [&](const goal::Task& t) { return t.kind == k; }));
}

std::size_t count_kind(const GoalSchedule& s, TaskKind k) {
    std::size_t n = 0;
    for (const auto& rs : s.ranks)
        n += count_kind(rs, k);
    return n;
}

std::size_t total_tasks(const GoalSchedule& s) {
    std::size_t n = 0;
    for (const auto& rs : s.ranks)
        n += rs.tasks.size();
    return n;
}

bool reaches(const RankSchedule& rs, TaskId from, TaskId to) {
    RankGraph g(rs);
    std::vector<bool> seen(rs.tasks.size());
    std::vector<TaskId> stack{from};
    while (!stack.empty()) {
        TaskId x = stack.back();
        stack.pop_back();
        if (x == to)
            return true;
        if (seen[x])
            continue;
        seen[x] = true;
        for (TaskId y : g.succ[x])
            stack.push_back(y);
    }
    return false;
}

std::vector<TaskId> of_kind(const goal::Fragment& f, TaskKind k) {
    std::vector<TaskId> out;
    for (TaskId i = 0; i < f.tasks.size(); ++i)
        if (f.tasks[i].kind == k)
            out.push_back(i);
    return out;
}

RankSchedule as_rank(const goal::Fragment& f) {
    RankSchedule rs;
    rs.tasks = f.tasks;
    rs.deps = f.deps;
    return rs;
}

} // namespace

// ---- stage 1 ----

TEST(GpuTrace, SingleEvent) {
    auto t = parse_gpu_trace(
        {R"({"gpu": 0, "streams": {"7": [{"kind": "collective", "op": "allreduce", "bytes": 64, "comm": "c", "ts": 5, "te": 9}]}})"},
        R"({"c": [0]})");
    ASSERT_EQ(t.gpus.at(0).size(), 1u);
    const auto& ev = t.gpus.at(0)[0].events;
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].op, NcclOp::Allreduce);
    EXPECT_EQ(ev[0].bytes, 64u);
    EXPECT_EQ(ev[0].ts, 5);
    EXPECT_EQ(ev[0].te, 9);
    EXPECT_EQ(t.gpus.at(0)[0].id, "7");
}

TEST(GpuTrace, OverlapRejected) {
    EXPECT_THROW(parse_gpu_trace({R"({"gpu": 0, "streams": {"0": [{"kind": "compute", "ts": 0, "te": 10},
                                                                  {"kind": "compute", "ts": 5, "te": 15}]}})"},
                                 "{}"),
                 ParseError);
}

TEST(GpuTrace, UnsortedInputIsSorted) {
    auto t = parse_gpu_trace({R"({"gpu": 0, "streams": {"0": [{"kind": "compute", "ts": 20, "te": 30},
                                                              {"kind": "compute", "ts": 0, "te": 10}]}})"},
                             "{}");
    EXPECT_EQ(t.gpus.at(0)[0].events[0].ts, 0);
}

TEST(GpuTrace, Errors) {
    const std::string c = R"({"c": [0, 1]})";
    auto one = [&](const std::string& ev) {
        return parse_gpu_trace({R"({"gpu": 0, "streams": {"0": [)" + ev + "]}}"}, c);
    };
    EXPECT_THROW(one(R"({"kind": "collective", "op": "allreduce", "bytes": 8, "comm": "nope", "ts": 0, "te": 1})"), ParseError);
    EXPECT_THROW(one(R"({"kind": "collective", "op": "alltoall", "bytes": 8, "comm": "c", "ts": 0, "te": 1})"), ParseError);
    EXPECT_THROW(one(R"({"kind": "collective", "op": "broadcast", "bytes": 8, "comm": "c", "root": 5, "ts": 0, "te": 1})"), ParseError);
    EXPECT_THROW(one(R"({"kind": "compute", "ts": 10, "te": 1})"), ParseError);
    EXPECT_THROW(one(R"({"kind": "kernel", "ts": 0, "te": 1})"), ParseError);
    EXPECT_THROW(one(R"({"kind": "compute", "te": 1})"), ParseError);
    EXPECT_THROW(parse_gpu_trace({"{ not json"}, c), ParseError);
    EXPECT_THROW(parse_gpu_trace({R"({"gpu": 0, "streams": {}})", R"({"gpu": 0, "streams": {}})"}, c), ParseError);
    // GPU 3 is not a member of c
    EXPECT_THROW(parse_gpu_trace({R"({"gpu": 3, "streams": {"0": [{"kind": "collective", "op": "allreduce",
                                   "bytes": 8, "comm": "c", "ts": 0, "te": 1}]}})"},
                                 c),
                 ParseError);
}

TEST(GpuTrace, RoundTripFourGpusTwoStreams) {
    Rng rng(11);
    for (int iter = 0; iter < 20; ++iter) {
        GpuTrace t;
        t.communicators["world"] = {0, 1, 2, 3};
        t.communicators["pair"] = {1, 2};
        for (GpuId g = 0; g < 4; ++g)
            for (const char* sid : {"0", "13"}) {
                TimeNs now = static_cast<TimeNs>(rng.below(50));
                for (int k = 0; k < 5; ++k) {
                    const TimeNs len = static_cast<TimeNs>(rng.below(100));
                    GpuKernelEvent e;
                    switch (rng.below(3)) {
                    case 0: e = compute(g, now, now + len); break;
                    case 1: e = coll(g, NcclOp::Allgather, 1 + rng.below(1 << 20), "world", now, now + len); break;
                    default:
                        e = (g == 1 || g == 2) ? coll(g, NcclOp::Broadcast, 1 + rng.below(99), "pair", now, now + len, 2)
                                               : compute(g, now, now + len);
                    }
                    add(t, sid, e);
                    now += len + static_cast<TimeNs>(rng.below(30));
                }
            }
        auto emitted = emit_gpu_trace(t);
        ASSERT_EQ(emitted.per_gpu.size(), 4u);
        GpuTrace back = parse_gpu_trace(emitted.per_gpu, emitted.communicators);
        EXPECT_EQ(back.communicators, t.communicators);
        ASSERT_EQ(back.gpus.size(), t.gpus.size());
        for (const auto& [g, streams] : t.gpus) {
            const auto& bs = back.gpus.at(g);
            ASSERT_EQ(bs.size(), streams.size());
            for (std::size_t s = 0; s < streams.size(); ++s) {
                EXPECT_EQ(bs[s].id, streams[s].id);
                ASSERT_EQ(bs[s].events.size(), streams[s].events.size());
                for (std::size_t k = 0; k < streams[s].events.size(); ++k) {
                    const auto& a = streams[s].events[k];
                    const auto& b = bs[s].events[k];
                    EXPECT_EQ(a.gpu, b.gpu);
                    EXPECT_EQ(a.stream, b.stream);
                    EXPECT_EQ(a.compute, b.compute);
                    EXPECT_EQ(a.ts, b.ts);
                    EXPECT_EQ(a.te, b.te);
                    if (!a.compute) {
                        EXPECT_EQ(a.op, b.op);
                        EXPECT_EQ(a.bytes, b.bytes);
                        EXPECT_EQ(a.comm, b.comm);
                        EXPECT_EQ(a.root, b.root);
                    }
                }
            }
        }
    }
}

TEST(GpuTrace, OpAndProtoNames) {
    EXPECT_EQ(parse_nccl_op("ReduceScatter"), NcclOp::ReduceScatter);
    EXPECT_EQ(parse_nccl_op("reduce_scatter"), NcclOp::ReduceScatter);
    EXPECT_EQ(parse_proto("ll"), Proto::LL);
    EXPECT_THROW(parse_proto("LL128"), InvalidArgument);
}

// ---- stage 2 ----

TEST(StreamDags, RootAndSinkJoinStreams) {
    GpuTrace t;
    t.communicators["c"] = {0};
    add(t, "0", compute(0, 0, 10));
    add(t, "1", coll(0, NcclOp::Allreduce, 8, "c", 3, 7));
    auto d = build_stream_dags(t);
    ASSERT_EQ(d.gpus.size(), 1u);
    const auto& rs = d.gpus[0].dag;
    RankGraph g(rs);
    ASSERT_EQ(g.roots().size(), 1u);
    ASSERT_EQ(g.sinks().size(), 1u);
    const TaskId root = g.roots()[0], sink = g.sinks()[0];
    EXPECT_EQ(g.succ[root].size(), 2u);
    EXPECT_EQ(g.pred[sink].size(), 2u);
    for (TaskId x : {root, sink}) {
        EXPECT_TRUE(rs.tasks[x].is_dummy());
    }
    EXPECT_EQ(d.gpus[0].num_streams, 2);
    EXPECT_EQ(d.gpus[0].placeholders.size(), 1u);
}

TEST(StreamDags, GapBecomesCalc) {
    GpuTrace t;
    add(t, "0", compute(0, 0, 10));
    add(t, "0", compute(0, 30, 40));
    auto d = build_stream_dags(t);
    const auto& rs = d.gpus[0].dag;
    // root, compute 10, gap, compute 10, sink
    ASSERT_EQ(rs.tasks.size(), 5u);
    std::vector<TimeNs> durs;
    for (const auto& x : rs.tasks)
        durs.push_back(x.duration_ns);
    std::multiset<TimeNs> got(durs.begin(), durs.end());
    EXPECT_EQ(got, (std::multiset<TimeNs>{0, 10, 20, 10, 0}));
    // chain: the 20 ns gap sits between the two kernels
    TaskId gap = static_cast<TaskId>(std::find(durs.begin(), durs.end(), 20) - durs.begin());
    RankGraph g(rs);
    ASSERT_EQ(g.pred[gap].size(), 1u);
    ASSERT_EQ(g.succ[gap].size(), 1u);
    EXPECT_EQ(rs.tasks[g.pred[gap][0]].duration_ns, 10);
    EXPECT_EQ(rs.tasks[g.succ[gap][0]].duration_ns, 10);
}

TEST(StreamDags, OneCpuLabelPerStream) {
    for (int k = 1; k <= 5; ++k) {
        GpuTrace t;
        for (int s = 0; s < k; ++s) {
            add(t, std::to_string(s * 3), compute(0, 0, 5));
            add(t, std::to_string(s * 3), compute(0, 9, 12));
        }
        auto d = build_stream_dags(t);
        std::set<std::uint16_t> cpus;
        for (const auto& x : d.gpus[0].dag.tasks)
            if (!x.is_dummy())
                cpus.insert(x.cpu);
        EXPECT_EQ(cpus.size(), static_cast<std::size_t>(k));
    }
}

TEST(StreamDags, InstancesAreCrossChecked) {
    GpuTrace t;
    t.communicators["c"] = {0, 1};
    add(t, "0", coll(0, NcclOp::Allreduce, 8, "c", 0, 1));
    // GPU 1 issues nothing on c
    add(t, "0", compute(1, 0, 1));
    try {
        build_stream_dags(t);
        FAIL();
    } catch (const InvalidArgument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("GPU 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("GPU 1"), std::string::npos) << msg;
    }
    GpuTrace u;
    u.communicators["c"] = {0, 1};
    add(u, "0", coll(0, NcclOp::Allreduce, 8, "c", 0, 1));
    add(u, "0", coll(1, NcclOp::Allreduce, 16, "c", 0, 1));
    EXPECT_THROW(build_stream_dags(u), InvalidArgument);
}

TEST(StreamDags, InstancesOrderedByStartTime) {
    GpuTrace t;
    t.communicators["c"] = {0, 1};
    // GPU 1 records the two calls on different streams, in swapped stream order
    add(t, "0", coll(0, NcclOp::Allreduce, 8, "c", 0, 1));
    add(t, "0", coll(0, NcclOp::Allgather, 32, "c", 5, 6));
    add(t, "0", coll(1, NcclOp::Allgather, 32, "c", 7, 9));
    add(t, "1", coll(1, NcclOp::Allreduce, 8, "c", 2, 3));
    auto d = build_stream_dags(t);
    ASSERT_EQ(d.instances.size(), 2u);
    EXPECT_EQ(d.instances[0].op, NcclOp::Allreduce);
    EXPECT_EQ(d.instances[1].op, NcclOp::Allgather);
    EXPECT_NE(d.instances[0].tag_base, d.instances[1].tag_base);
}

// ---- stage 3 ----

TEST(Decompose, BroadcastFourChunks) {
    const std::vector<GpuId> ring{0, 1, 2, 3};
    NcclConfig cfg;
    auto f = decompose_collective(NcclOp::Broadcast, ring, 2 * MiB, cfg, kNcclTagBase, 0);
    ASSERT_EQ(f.size(), 4u);
    auto root_sends = of_kind(f[0], TaskKind::Send);
    ASSERT_EQ(root_sends.size(), 4u);
    EXPECT_TRUE(of_kind(f[0], TaskKind::Recv).empty());
    auto rr = as_rank(f[0]);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(f[0].tasks[root_sends[j]].bytes, 512 * KiB);
        EXPECT_EQ(f[0].tasks[root_sends[j]].peer, 1u);
        if (j > 0)
            EXPECT_TRUE(reaches(rr, root_sends[j - 1], root_sends[j]));
    }
    for (std::size_t i : {1u, 2u}) {
        auto sends = of_kind(f[i], TaskKind::Send);
        auto recvs = of_kind(f[i], TaskKind::Recv);
        ASSERT_EQ(sends.size(), 4u);
        ASSERT_EQ(recvs.size(), 4u);
        auto rs = as_rank(f[i]);
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_TRUE(reaches(rs, recvs[j], sends[j]));
            if (j + 1 < 4)
                EXPECT_FALSE(reaches(rs, recvs[j + 1], sends[j])) << "forwarding must be pipelined";
        }
    }
    EXPECT_TRUE(of_kind(f[3], TaskKind::Send).empty());
    EXPECT_EQ(of_kind(f[3], TaskKind::Recv).size(), 4u);
}

TEST(Decompose, BroadcastFromNonZeroRoot) {
    auto f = decompose_collective(NcclOp::Broadcast, {0, 1, 2}, 100, NcclConfig{}, kNcclTagBase, 2);
    EXPECT_EQ(of_kind(f[2], TaskKind::Send).size(), 1u);
    EXPECT_TRUE(of_kind(f[2], TaskKind::Recv).empty());
    EXPECT_EQ(f[2].tasks[of_kind(f[2], TaskKind::Send)[0]].peer, 0u);
    // GPU 1 is last in the rotated ring
    EXPECT_TRUE(of_kind(f[1], TaskKind::Send).empty());
}

TEST(Decompose, TwoGpuTinyBroadcast) {
    auto f = decompose_collective(NcclOp::Broadcast, {0, 1}, 8, NcclConfig{}, kNcclTagBase, 0);
    ASSERT_EQ(f[0].tasks.size(), 1u);
    ASSERT_EQ(f[1].tasks.size(), 1u);
    EXPECT_EQ(f[0].tasks[0].kind, TaskKind::Send);
    EXPECT_EQ(f[1].tasks[0].kind, TaskKind::Recv);
    EXPECT_EQ(f[0].tasks[0].bytes, 8u);
    EXPECT_EQ(f[0].tasks[0].tag, f[1].tasks[0].tag);
}

TEST(Decompose, AllreduceTwoChannels) {
    const std::size_t P = 4;
    NcclConfig cfg;
    cfg.nchannels = 2;
    auto f = decompose_collective(NcclOp::Allreduce, {0, 1, 2, 3}, 4 * MiB, cfg, kNcclTagBase, 0);
    // analytic ring volume: every GPU sends 2(P-1)/P of the buffer
    const Bytes expect_total = 2 * (P - 1) * (4 * MiB) / P;
    for (std::size_t i = 0; i < P; ++i) {
        std::map<Tag, std::vector<Bytes>> per_channel;
        Bytes total = 0;
        for (const auto& t : f[i].tasks)
            if (t.kind == TaskKind::Send) {
                per_channel[t.tag].push_back(t.bytes);
                total += t.bytes;
            }
        ASSERT_EQ(per_channel.size(), 2u);
        for (const auto& [tag, sizes] : per_channel) {
            EXPECT_EQ(sizes.size(), 6u);
            for (Bytes b : sizes)
                EXPECT_EQ(b, 512 * KiB);
        }
        EXPECT_EQ(total, expect_total);
    }
}

TEST(Decompose, LowLatencyProtocolChunksAndInflates) {
    NcclConfig cfg;
    cfg.proto = Proto::LL;
    auto f = decompose_collective(NcclOp::Broadcast, {0, 1, 2, 3}, 2 * MiB, cfg, kNcclTagBase, 0);
    auto sends = of_kind(f[0], TaskKind::Send);
    EXPECT_EQ(sends.size(), (2 * MiB) / (32 * KiB));
    for (TaskId s : sends)
        EXPECT_EQ(f[0].tasks[s].bytes, 2 * 32 * KiB);
}

TEST(Decompose, PayloadConservation) {
    Rng rng(5);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t P = 2 + rng.below(7);
        std::vector<GpuId> ring(P);
        std::iota(ring.begin(), ring.end(), 0);
        NcclConfig cfg;
        cfg.nchannels = 1 + static_cast<std::uint32_t>(rng.below(4));
        cfg.slot_bytes_simple = 1 + rng.below(5000);
        const Bytes bytes = 1 + rng.below(100000);
        const auto op = static_cast<NcclOp>(rng.below(4));
        const GpuId root = static_cast<GpuId>(rng.below(P));
        auto f = decompose_collective(op, ring, bytes, cfg, kNcclTagBase, root);
        const Bytes share = (bytes + cfg.nchannels - 1) / cfg.nchannels;
        const Bytes seg = (share + P - 1) / P;
        const std::size_t steps = op == NcclOp::Allreduce ? 2 * (P - 1) : P - 1;
        for (std::size_t i = 0; i < P; ++i) {
            std::map<Tag, Bytes> sent;
            for (const auto& t : f[i].tasks) {
                EXPECT_LE(t.bytes, cfg.slot_bytes_simple);
                if (t.kind == TaskKind::Send)
                    sent[t.tag] += t.bytes;
            }
            const bool terminal = op == NcclOp::Broadcast && (i + 1) % P == root;
            if (terminal) {
                EXPECT_TRUE(sent.empty());
                continue;
            }
            ASSERT_EQ(sent.size(), cfg.nchannels);
            for (const auto& [tag, b] : sent) {
                EXPECT_GE(tag, kNcclTagBase);
                EXPECT_LT(tag, kNcclTagBase + cfg.nchannels);
                EXPECT_EQ(b, op == NcclOp::Broadcast ? share : seg * steps);
            }
        }
    }
}

TEST(Decompose, Errors) {
    NcclConfig cfg;
    EXPECT_THROW(decompose_collective(NcclOp::Allreduce, {0}, 8, cfg, kNcclTagBase), InvalidArgument);
    cfg.nchannels = 0;
    EXPECT_THROW(decompose_collective(NcclOp::Allreduce, {0, 1}, 8, cfg, kNcclTagBase), InvalidArgument);
    cfg.nchannels = 65;
    EXPECT_THROW(decompose_collective(NcclOp::Allreduce, {0, 1}, 8, cfg, kNcclTagBase), InvalidArgument);
    cfg = {};
    cfg.slot_bytes_ll = 0;
    EXPECT_THROW(cfg.check(), InvalidArgument);
    EXPECT_THROW(decompose_collective(NcclOp::Broadcast, {0, 1}, 8, NcclConfig{}, kNcclTagBase, 9), InvalidArgument);
}

TEST(Decompose, ConfiguredRingOrder) {
    NcclConfig cfg;
    cfg.ring_order = {3, 1, 0, 2};
    EXPECT_EQ(ring_order({0, 1, 2, 3}, cfg), (std::vector<GpuId>{3, 1, 0, 2}));
    EXPECT_EQ(ring_order({2, 1}, cfg), (std::vector<GpuId>{1, 2}));
    EXPECT_EQ(ring_order({2, 0, 1}, NcclConfig{}), (std::vector<GpuId>{0, 1, 2}));
    cfg.ring_order = {0};
    EXPECT_THROW(ring_order({0, 1}, cfg), InvalidArgument);
}

TEST(Decompose, SubstitutesPlaceholdersAndKeepsStreamCpu) {
    GpuTrace t;
    t.communicators["c"] = {0, 1};
    for (GpuId g : {0u, 1u}) {
        add(t, "0", compute(g, 0, 10));
        add(t, "5", coll(g, NcclOp::Allreduce, 4096, "c", 0, 50));
    }
    auto dags = build_stream_dags(t);
    auto out = decompose_all(dags, t, NcclConfig{});
    ASSERT_EQ(out.size(), 2u);
    for (const auto& d : out) {
        // 2 steps of one send and one recv
        EXPECT_EQ(count_kind(d.dag, TaskKind::Send), 2u);
        EXPECT_EQ(count_kind(d.dag, TaskKind::Recv), 2u);
        for (const auto& x : d.dag.tasks)
            if (x.is_comm())
                EXPECT_EQ(x.cpu, 1);
        RankGraph g(d.dag);
        EXPECT_EQ(g.roots().size(), 1u);
        EXPECT_EQ(g.sinks().size(), 1u);
    }
}

// ---- stage 4 ----

namespace {

GpuTrace ring_allreduce_trace(std::size_t P, Bytes bytes) {
    std::vector<GpuId> members(P);
    std::iota(members.begin(), members.end(), 0);
    GpuTrace t = single_collective(NcclOp::Allreduce, members, bytes);
    for (GpuId g : members)
        add(t, "1", compute(g, 0, 500));
    return t;
}

} // namespace

TEST(NodeMap, IntraNodeCost) {
    GpuNodeMap m;
    EXPECT_EQ(intra_node_ns(512 * KiB, m), 3495);
    m.intra_latency_ns = 100;
    EXPECT_EQ(intra_node_ns(512 * KiB, m), 3595);
    m.intra_bandwidth_GBps = 0;
    EXPECT_THROW(intra_node_ns(1, m), InvalidArgument);
}

TEST(NodeMap, TwoNodeElision) {
    GpuTrace t = ring_allreduce_trace(4, 4 * MiB);
    auto m = GpuNodeMap::blocked({0, 1, 2, 3}, 2);
    auto s = nccl_to_goal(t, NcclConfig{}, m);
    ASSERT_EQ(s.num_ranks(), 2u);
    std::set<Rank> peers;
    for (const auto& rs : s.ranks)
        for (const auto& x : rs.tasks)
            if (x.is_comm()) {
                EXPECT_NE(x.peer, rs.rank);
                peers.insert(x.peer);
            }
    EXPECT_EQ(peers, (std::set<Rank>{0, 1}));
    // ring 0->1->2->3->0: links 0->1 and 2->3 are elided, 1->2 and 3->0 stay
    auto flat = decompose_all(build_stream_dags(t), t, NcclConfig{});
    std::size_t elided = 0, kept = 0;
    for (const auto& d : flat)
        for (const auto& x : d.dag.tasks)
            if (x.kind == TaskKind::Send)
                ((d.gpu / 2 == x.peer / 2) ? elided : kept) += 1;
    EXPECT_EQ(count_kind(s, TaskKind::Send), kept);
    EXPECT_EQ(count_kind(s, TaskKind::Recv), kept);
    EXPECT_EQ(elided, kept);
    // elided transfers became calcs of the intra-node cost
    const TimeNs chunk = intra_node_ns(512 * KiB, m);
    std::size_t chunk_calcs = 0;
    for (const auto& rs : s.ranks)
        chunk_calcs += static_cast<std::size_t>(std::count_if(rs.tasks.begin(), rs.tasks.end(), [&](const goal::Task& x) {
            return x.kind == TaskKind::Calc && x.duration_ns == chunk;
        }));
    EXPECT_EQ(chunk_calcs, 2 * elided);
    EXPECT_TRUE(goal::validate(s).empty()) << goal::validate(s).to_string(&s);
}

TEST(NodeMap, SingleNodeHasNoMessages) {
    GpuTrace t = ring_allreduce_trace(4, MiB);
    auto s = nccl_to_goal(t, NcclConfig{}, GpuNodeMap::blocked({0, 1, 2, 3}, 4));
    ASSERT_EQ(s.num_ranks(), 1u);
    EXPECT_EQ(count_kind(s, TaskKind::Send), 0u);
    EXPECT_EQ(count_kind(s, TaskKind::Recv), 0u);
}

TEST(NodeMap, MissingGpuRejected) {
    GpuTrace t = ring_allreduce_trace(3, MiB);
    GpuNodeMap m = GpuNodeMap::blocked({0, 1}, 1);
    EXPECT_THROW(nccl_to_goal(t, NcclConfig{}, m), InvalidArgument);
}

TEST(NodeMap, DistinctStreamsPerGpuOnOneNode) {
    GpuTrace t = ring_allreduce_trace(2, MiB);
    auto s = nccl_to_goal(t, NcclConfig{}, GpuNodeMap::blocked({0, 1}, 2));
    std::set<std::uint16_t> cpus;
    for (const auto& x : s[0].tasks)
        if (!x.is_dummy())
            cpus.insert(x.cpu);
    // two GPUs with two streams each
    EXPECT_EQ(cpus, (std::set<std::uint16_t>{0, 1, 2, 3}));
}

TEST(NodeMap, DummiesHaveZeroCostAndEdges) {
    GpuTrace t = ring_allreduce_trace(4, MiB);
    auto s = nccl_to_goal(t, NcclConfig{}, GpuNodeMap::blocked({0, 1, 2, 3}, 2));
    for (const auto& rs : s.ranks) {
        RankGraph g(rs);
        for (TaskId i = 0; i < rs.tasks.size(); ++i)
            if (rs.tasks[i].is_dummy())
                EXPECT_GE(g.succ[i].size() + g.pred[i].size(), 1u);
    }
}

TEST(NodeMap, InterNodeVolumeMatchesRingOracle) {
    Rng rng(17);
    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t P = 2 + rng.below(7);
        const std::size_t nodes = 1 + rng.below(P);
        std::vector<GpuId> gpus(P);
        std::iota(gpus.begin(), gpus.end(), 0);
        GpuNodeMap m;
        std::vector<std::uint16_t> next_local(nodes, 0);
        std::vector<Rank> node_of(P);
        for (GpuId g = 0; g < P; ++g) {
            // make sure every node is used
            node_of[g] = g < nodes ? g : static_cast<Rank>(rng.below(nodes));
            m.gpu[g] = {node_of[g], next_local[node_of[g]]++};
        }
        NcclConfig cfg;
        cfg.nchannels = 1 + static_cast<std::uint32_t>(rng.below(3));
        const Bytes bytes = 1 + rng.below(3 * MiB);
        const auto op = static_cast<NcclOp>(1 + rng.below(3)); // ring ops
        GpuTrace t = single_collective(op, gpus, bytes);
        auto s = nccl_to_goal(t, cfg, m);

        const Bytes share = (bytes + cfg.nchannels - 1) / cfg.nchannels;
        const Bytes seg = (share + P - 1) / P;
        const std::size_t steps = op == NcclOp::Allreduce ? 2 * (P - 1) : P - 1;
        Bytes expect = 0;
        for (GpuId g = 0; g < P; ++g)
            if (node_of[g] != node_of[(g + 1) % P])
                expect += seg * steps * cfg.nchannels;
        Bytes got = 0;
        for (const auto& rs : s.ranks)
            for (const auto& x : rs.tasks)
                if (x.kind == TaskKind::Send)
                    got += x.bytes;
        EXPECT_EQ(got, expect);
        EXPECT_TRUE(goal::validate(s).empty());
    }
}

TEST(NodeMap, TaskCountIndependentOfMap) {
    Rng rng(23);
    GpuTrace t = ring_allreduce_trace(6, 2 * MiB);
    const std::vector<GpuId> gpus{0, 1, 2, 3, 4, 5};
    std::optional<std::size_t> gpu_tasks;
    for (int iter = 0; iter < 20; ++iter) {
        auto shuffled = gpus;
        rng.shuffle(shuffled);
        const std::size_t per = 1 + rng.below(6);
        GpuNodeMap m;
        for (std::size_t i = 0; i < shuffled.size(); ++i)
            m.gpu[shuffled[i]] = {static_cast<Rank>(i / per), static_cast<std::uint16_t>(i % per)};
        auto s = nccl_to_goal(t, NcclConfig{}, m);
        // each node adds its own zero-cost root and sink
        const std::size_t n = total_tasks(s) - 2 * s.num_ranks();
        if (!gpu_tasks)
            gpu_tasks = n;
        EXPECT_EQ(n, *gpu_tasks);
    }
}

TEST(NodeMap, InterNodeTagsKeepGpuPairsApart) {
    // GPUs 0,1 on node 0 and 2,3 on node 1, two independent pairs 0<->2 and 1<->3
    GpuTrace t;
    t.communicators["a"] = {0, 2};
    t.communicators["b"] = {1, 3};
    for (GpuId g : {0u, 2u})
        add(t, "0", coll(g, NcclOp::Allreduce, MiB, "a", 0, 10));
    for (GpuId g : {1u, 3u})
        add(t, "0", coll(g, NcclOp::Allreduce, 3 * MiB, "b", 0, 10));
    auto s = nccl_to_goal(t, NcclConfig{}, GpuNodeMap::blocked({0, 1, 2, 3}, 2));
    std::map<Tag, std::set<Bytes>> sizes;
    for (const auto& x : s[0].tasks)
        if (x.kind == TaskKind::Send)
            sizes[x.tag].insert(x.bytes);
    for (const auto& [tag, b] : sizes)
        EXPECT_EQ(b.size(), 1u) << "tag " << tag << " mixes two GPU pairs";
    EXPECT_GE(sizes.size(), 2u);
}

TEST(NodeMap, SimulatesWithoutDeadlock) {
    for (Proto proto : {Proto::Simple, Proto::LL}) {
        GpuTrace t = ring_allreduce_trace(8, 8 * MiB);
        add(t, "1", compute(0, 600, 900));
        NcclConfig cfg;
        cfg.nchannels = 2;
        cfg.proto = proto;
        auto s = nccl_to_goal(t, cfg, GpuNodeMap::blocked({0, 1, 2, 3, 4, 5, 6, 7}, 4));
        for (Bytes S : {Bytes{0}, kUnlimitedBytes}) {
            auto p = loggops::Params::ai_cluster();
            p.S = S;
            loggops::LogGOPSBackend b(p);
            auto r = sim::run_simulation(s, b);
            EXPECT_GT(r.report.makespan_ns, 900);
        }
    }
}
