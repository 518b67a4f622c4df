#include <gtest/gtest.h>

#include <map>

#include "goalnet/goal/validate.hpp"
#include "goalnet/loggops/backend.hpp"
#include "goalnet/schedgen/collectives.hpp"
#include "goalnet/schedgen/microbench.hpp"
#include "goalnet/schedgen/mpi_trace.hpp"
#include "goalnet/sim/engine.hpp"

using namespace goalnet;
using namespace goalnet::goal;
using namespace goalnet::schedgen;

namespace {

struct Counts {
    std::size_t sends = 0, recvs = 0, calcs = 0;
    Bytes sent = 0, received = 0;
};

Counts count(const Fragment& f) {
    Counts c;
    for (const auto& t : f.tasks) {
        if (t.kind == TaskKind::Send) {
            ++c.sends;
            c.sent += t.bytes;
        } else if (t.kind == TaskKind::Recv) {
            ++c.recvs;
            c.received += t.bytes;
        } else {
            ++c.calcs;
        }
    }
    return c;
}

Counts count(const RankSchedule& rs) {
    Fragment f;
    f.tasks = rs.tasks;
    return count(f);
}

std::vector<Rank> iota_comm(std::size_t n) {
    std::vector<Rank> c(n);
    for (std::size_t i = 0; i < n; ++i)
        c[i] = static_cast<Rank>(i);
    return c;
}

TimeNs simulate(const GoalSchedule& s) {
    loggops::LogGOPSBackend b(loggops::Params::ai_cluster());
    return sim::run_simulation(s, b).report.makespan_ns;
}

Bytes ceil_div(Bytes a, Bytes b) { return (a + b - 1) / b; }

} // namespace

TEST(Microbench, Incast) {
    GoalSchedule s = gen_incast(4, 1024);
    EXPECT_EQ(count(s[0]).recvs, 3u);
    EXPECT_EQ(count(s[0]).sends, 0u);
    for (Rank r = 1; r < 4; ++r) {
        ASSERT_EQ(s[r].tasks.size(), 1u);
        EXPECT_EQ(s[r].tasks[0].kind, TaskKind::Send);
        EXPECT_EQ(s[r].tasks[0].bytes, 1024u);
        EXPECT_EQ(s[r].tasks[0].peer, 0u);
    }
    EXPECT_TRUE(validate(s).empty());
}

TEST(Microbench, PermutationIsDerangement) {
    auto pi = derangement(8, 7);
    for (Rank i = 0; i < 8; ++i)
        EXPECT_NE(pi[i], i);
    GoalSchedule s = gen_permutation(8, 4096, 7);
    auto rep = validate(s);
    EXPECT_TRUE(rep.mismatches.empty());
    EXPECT_TRUE(rep.empty());
    for (Rank i = 0; i < 8; ++i) {
        ASSERT_EQ(s[i].tasks.size(), 2u);
        EXPECT_EQ(s[i].tasks[0].peer, pi[i]);
        EXPECT_EQ(s[pi[i]].tasks[1].peer, i);
    }
    EXPECT_EQ(gen_permutation(8, 4096, 7), s);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        auto p = derangement(2 + seed % 9, seed);
        std::vector<bool> hit(p.size(), false);
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_NE(p[i], i);
            hit[p[i]] = true;
        }
        EXPECT_EQ(std::count(hit.begin(), hit.end(), true), static_cast<long>(p.size()));
    }
}

TEST(Microbench, RingExchange) {
    GoalSchedule s = gen_ring_exchange(2, 8, 1);
    for (Rank r = 0; r < 2; ++r) {
        auto c = count(s[r]);
        EXPECT_EQ(c.sends, 1u);
        EXPECT_EQ(c.recvs, 1u);
        EXPECT_EQ(c.sent, 8u);
    }
    GoalSchedule m = gen_ring_exchange(5, 100, 4);
    EXPECT_TRUE(validate(m).empty());
    // round r+1 depends on both tasks of round r
    EXPECT_EQ(m[3].deps.size(), 3u * 4u);
    EXPECT_GT(simulate(m), 0);
}

TEST(Microbench, RejectsDegenerateInput) {
    EXPECT_THROW(gen_incast(1, 8), InvalidArgument);
    EXPECT_THROW(gen_permutation(1, 8, 0), InvalidArgument);
    EXPECT_THROW(gen_ring_exchange(4, 0, 1), InvalidArgument);
}

TEST(Collectives, RingAllreduceStepCounts) {
    auto f = expand_collective(MpiOp::Allreduce, {0, 1, 2, 3}, 4096, Algo::Ring, 99);
    ASSERT_EQ(f.size(), 4u);
    for (const auto& frag : f) {
        auto c = count(frag);
        EXPECT_EQ(c.sends, 6u);
        EXPECT_EQ(c.recvs, 6u);
        for (const auto& t : frag.tasks) {
            EXPECT_EQ(t.bytes, 1024u);
            EXPECT_EQ(t.tag, 99u);
        }
    }
}

TEST(Collectives, TwoRankBinomialBcast) {
    auto f = expand_collective(MpiOp::Bcast, {0, 1}, 8, Algo::BinomialTree, 1, 0);
    EXPECT_EQ(count(f[0]).sends, 1u);
    EXPECT_EQ(count(f[0]).recvs, 0u);
    EXPECT_EQ(count(f[1]).recvs, 1u);
    EXPECT_EQ(count(f[1]).sends, 0u);
}

TEST(Collectives, BarrierRounds) {
    auto f = expand_collective(MpiOp::Barrier, {0, 1, 2, 3}, 0, Algo::RecursiveDoubling, 1);
    for (const auto& frag : f) {
        auto c = count(frag);
        EXPECT_EQ(c.sends, 2u);
        EXPECT_EQ(c.recvs, 2u);
        EXPECT_EQ(c.sent, 2u);
    }
}

TEST(Collectives, ReductionCostIsOptional) {
    auto none = expand_collective(MpiOp::Allreduce, iota_comm(4), 4096, Algo::Ring, 1);
    EXPECT_EQ(count(none[0]).calcs, 0u);
    CollectiveOptions o;
    o.reduce_ns_per_byte = 0.5;
    auto some = expand_collective(MpiOp::Allreduce, iota_comm(4), 4096, Algo::Ring, 1, 0, o);
    auto c = count(some[0]);
    EXPECT_EQ(c.calcs, 3u); // one per reduce-scatter step
    for (const auto& t : some[0].tasks)
        if (t.kind == TaskKind::Calc)
            EXPECT_EQ(t.duration_ns, 512);
}

TEST(Collectives, RejectsUnsupported) {
    EXPECT_THROW(expand_collective(MpiOp::Allreduce, iota_comm(3), 8, Algo::RecursiveDoubling, 1), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Barrier, iota_comm(6), 8, Algo::RecursiveDoubling, 1), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Allreduce, iota_comm(4), 8, Algo::Linear, 1), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Alltoall, iota_comm(4), 8, Algo::Ring, 1), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Bcast, iota_comm(4), 8, Algo::Linear, 1, 9), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Bcast, {0}, 8, Algo::Linear, 1), InvalidArgument);
    EXPECT_THROW(expand_collective(MpiOp::Bcast, {0, 0}, 8, Algo::Linear, 1), InvalidArgument);
}

// Every supported expansion validates, simulates, and sends the analytic volume.
TEST(Collectives, VolumesAndValidity) {
    const std::vector<std::pair<MpiOp, Algo>> matrix = {
        {MpiOp::Allreduce, Algo::Ring},      {MpiOp::Allreduce, Algo::RecursiveDoubling},
        {MpiOp::Bcast, Algo::BinomialTree},  {MpiOp::Bcast, Algo::Linear},
        {MpiOp::Bcast, Algo::Ring},          {MpiOp::ReduceScatter, Algo::Ring},
        {MpiOp::Allgather, Algo::Ring},      {MpiOp::Alltoall, Algo::Linear},
        {MpiOp::Barrier, Algo::RecursiveDoubling}};
    for (auto [op, algo] : matrix) {
        for (std::size_t P = 2; P <= 9; ++P) {
            if (algo == Algo::RecursiveDoubling && (P & (P - 1)))
                continue;
            for (Bytes b : {Bytes{1}, Bytes{1000}, Bytes{1 << 20}}) {
                const Rank root = static_cast<Rank>(P / 2);
                GoalSchedule s = gen_collective(op, P, b, algo, root);
                ASSERT_TRUE(validate(s).empty()) << to_string(op) << "/" << to_string(algo) << " P=" << P;
                EXPECT_GT(simulate(s), 0);
                unsigned lg = 0;
                while ((std::size_t{1} << lg) < P)
                    ++lg;
                Bytes total = 0;
                for (Rank r = 0; r < P; ++r) {
                    auto c = count(s[r]);
                    total += c.sent;
                    switch (op) {
                    case MpiOp::Allreduce:
                        EXPECT_EQ(c.sent, algo == Algo::Ring ? 2 * (P - 1) * ceil_div(b, P) : lg * b);
                        break;
                    case MpiOp::ReduceScatter:
                    case MpiOp::Allgather:
                    case MpiOp::Alltoall:
                        EXPECT_EQ(c.sent, (P - 1) * ceil_div(b, P));
                        break;
                    case MpiOp::Barrier:
                        EXPECT_EQ(c.sent, lg);
                        break;
                    case MpiOp::Bcast:
                        EXPECT_EQ(c.received, r == root ? 0 : b);
                        if (r == root && algo == Algo::BinomialTree)
                            EXPECT_EQ(c.sends, lg);
                        break;
                    default:
                        break;
                    }
                }
                if (op == MpiOp::Bcast)
                    EXPECT_EQ(total, (P - 1) * b);
                auto analytic = analytic_bytes_sent(op, P, b, algo, root);
                for (Rank r = 0; r < P; ++r)
                    EXPECT_EQ(count(s[r]).sent, analytic[r]);
            }
        }
    }
}

TEST(MpiTrace, ParsesConsistentAllreduce) {
    auto t = parse_mpi_trace({"ALLREDUCE,4096,-,0-1,1000,2500\n", "op,bytes,peer_or_root,comm,tstart_ns,tend_ns\nALLREDUCE,4096,-,0-1,1100,2400\n"});
    ASSERT_EQ(t.size(), 2u);
    ASSERT_EQ(t[1].size(), 1u);
    EXPECT_EQ(t[1][0].op, MpiOp::Allreduce);
    EXPECT_EQ(t[1][0].comm, (std::vector<Rank>{0, 1}));
    EXPECT_EQ(t[1][0].tstart_ns, 1100);
}

TEST(MpiTrace, PairsPointToPoint) {
    auto t = parse_mpi_trace({"SEND,64,1,-,0,10\n", "# comment\n\nRECV,64,0,-,0,20\n"});
    EXPECT_EQ(t[0][0].peer, 1u);
    EXPECT_EQ(t[1][0].op, MpiOp::Recv);
    EXPECT_THROW(parse_mpi_trace({"SEND,64,1,-,0,10\n", ""}), ParseError);
}

TEST(MpiTrace, CommMismatchNamesBothRanks) {
    try {
        parse_mpi_trace({"ALLREDUCE,8,-,0-1,0,10\n", "ALLREDUCE,8,-,0-1-2,0,10\n", "ALLREDUCE,8,-,0-1-2,0,10\n"});
        FAIL();
    } catch (const ParseError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("rank 0"), std::string::npos) << msg;
        EXPECT_NE(msg.find("rank 1"), std::string::npos) << msg;
    }
}

TEST(MpiTrace, RejectsBadLines) {
    EXPECT_THROW(parse_mpi_trace({"SEND,8,1,-,10,5\n", "RECV,8,0,-,0,1\n"}), ParseError);
    EXPECT_THROW(parse_mpi_trace({"SEND,8,1,-,10,20\nSEND,8,1,-,5,30\n", "RECV,8,0,-,0,1\nRECV,8,0,-,2,3\n"}), ParseError);
    EXPECT_THROW(parse_mpi_trace({"FOO,8,1,-,0,1\n"}), ParseError);
    EXPECT_THROW(parse_mpi_trace({"SEND,8,1,-,0\n", ""}), ParseError);
    EXPECT_THROW(parse_mpi_trace({"ALLREDUCE,8,-,-,0,1\n"}), ParseError);
    EXPECT_THROW(parse_mpi_trace({"ALLREDUCE,x,-,0-1,0,1\n", "ALLREDUCE,8,-,0-1,0,1\n"}), ParseError);
}

TEST(TraceToGoal, BridgesGaps) {
    auto t = parse_mpi_trace({"SEND,8,1,-,0,10\nSEND,8,1,-,25,30\nSEND,8,1,-,28,40\n",
                              "RECV,8,0,-,0,10\nRECV,8,0,-,12,30\nRECV,8,0,-,31,40\n"});
    GoalSchedule s = trace_to_goal(t);
    std::vector<TimeNs> gaps;
    for (const auto& task : s[0].tasks)
        if (task.kind == TaskKind::Calc)
            gaps.push_back(task.duration_ns);
    EXPECT_EQ(gaps, (std::vector<TimeNs>{15, 0}));
    EXPECT_TRUE(validate(s).empty());
    // program order is a chain
    EXPECT_EQ(s[0].deps.size(), 4u);
}

TEST(TraceToGoal, AllreduceAndBarrier) {
    std::vector<std::string> files;
    for (int r = 0; r < 4; ++r)
        files.push_back("ALLREDUCE,4096,-,0-1-2-3,0,100\nBARRIER,0,-,0-1-2-3,150,160\n");
    GoalSchedule s = trace_to_goal(parse_mpi_trace(files));
    EXPECT_TRUE(validate(s).empty());
    std::size_t sends = 0;
    for (const auto& rs : s.ranks)
        sends += count(rs).sends;
    EXPECT_EQ(sends, 4u * (6 + 2));
    EXPECT_GT(simulate(s), 0);
    EXPECT_EQ(trace_to_goal(parse_mpi_trace(files)), s);
}

TEST(TraceToGoal, SubCommunicatorsAndMixedTraffic) {
    std::vector<std::string> files = {
        "BCAST,100,2,0-2,0,5\nSEND,10,1,-,6,7\nALLGATHER,40,-,0-1-2-3,10,20\n",
        "ALLREDUCE,64,-,1-3,0,4\nRECV,10,0,-,5,8\nALLGATHER,40,-,0-1-2-3,10,20\n",
        "BCAST,100,2,0-2,0,5\nALLGATHER,40,-,0-1-2-3,10,20\n",
        "ALLREDUCE,64,-,1-3,0,3\nALLGATHER,40,-,0-1-2-3,10,20\n"};
    GoalSchedule s = trace_to_goal(parse_mpi_trace(files));
    EXPECT_TRUE(validate(s).empty()) << validate(s).to_string(&s);
    std::map<Tag, std::size_t> tags;
    for (const auto& rs : s.ranks)
        for (const auto& t : rs.tasks)
            if (t.is_comm())
                ++tags[t.tag];
    // P2P tag plus one tag per collective instance
    EXPECT_EQ(tags.size(), 4u);
    EXPECT_EQ(tags.at(0), 2u);
    EXPECT_GT(simulate(s), 0);
}
