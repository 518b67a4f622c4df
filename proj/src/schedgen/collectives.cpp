#include "goalnet/schedgen/collectives.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace goalnet::schedgen {

using goal::Fragment;
using goal::Task;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Bytes ceil_div(Bytes a, Bytes b) { return a / b + (a % b != 0); }

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

unsigned log2_floor(std::size_t n) {
    unsigned k = 0;
    while (n >>= 1)
        ++k;
    return k;
}

TimeNs reduce_cost(Bytes b, const CollectiveOptions& o) {
    if (o.reduce_ns_per_byte <= 0)
        return 0;
    return static_cast<TimeNs>(std::llround(static_cast<double>(b) * o.reduce_ns_per_byte));
}

// Ring step pattern shared by allreduce, reduce_scatter and allgather: each
// step sends to the next position and receives from the previous one; the
// next step waits for both (and for the reduction of the received chunk).
void ring_steps(std::vector<Fragment>& out, const std::vector<Rank>& comm, std::size_t steps, Bytes chunk, Tag tag,
                std::size_t reducing_steps, const CollectiveOptions& opts) {
    const std::size_t P = comm.size();
    const TimeNs reduce = reduce_cost(chunk, opts);
    for (std::size_t i = 0; i < P; ++i) {
        Fragment& f = out[i];
        const Rank next = comm[(i + 1) % P];
        const Rank prev = comm[(i + P - 1) % P];
        std::vector<TaskId> last;
        for (std::size_t s = 0; s < steps; ++s) {
            TaskId snd = f.add(Task::send(chunk, next, tag));
            TaskId rcv = f.add(Task::recv(chunk, prev, tag));
            for (TaskId l : last) {
                f.require(snd, l);
                f.require(rcv, l);
            }
            last = {snd, rcv};
            if (s < reducing_steps && reduce > 0) {
                TaskId c = f.add(Task::calc(reduce));
                f.require(c, rcv);
                last = {snd, c};
            }
        }
    }
}

void recursive_doubling(std::vector<Fragment>& out, const std::vector<Rank>& comm, Bytes bytes, Tag tag,
                        TimeNs reduce) {
    const std::size_t P = comm.size();
    if (!is_pow2(P))
        throw InvalidArgument("recursive doubling needs a power-of-two communicator, got " + std::to_string(P) +
                              " ranks");
    for (std::size_t i = 0; i < P; ++i) {
        Fragment& f = out[i];
        std::vector<TaskId> last;
        for (std::size_t mask = 1; mask < P; mask <<= 1) {
            const Rank partner = comm[i ^ mask];
            TaskId snd = f.add(Task::send(bytes, partner, tag));
            TaskId rcv = f.add(Task::recv(bytes, partner, tag));
            for (TaskId l : last) {
                f.require(snd, l);
                f.require(rcv, l);
            }
            last = {snd, rcv};
            if (reduce > 0) {
                TaskId c = f.add(Task::calc(reduce));
                f.require(c, rcv);
                last = {snd, c};
            }
        }
    }
}

void binomial_bcast(std::vector<Fragment>& out, const std::vector<Rank>& comm, Bytes bytes, Tag tag,
                    std::size_t root) {
    const std::size_t P = comm.size();
    for (std::size_t i = 0; i < P; ++i) {
        Fragment& f = out[i];
        const std::size_t v = (i + P - root) % P; // position relative to the root
        std::size_t mask = 1;
        std::vector<TaskId> last;
        if (v != 0) {
            const std::size_t hb = std::size_t{1} << log2_floor(v);
            last = {f.add(Task::recv(bytes, comm[(v - hb + root) % P], tag))};
            mask = hb << 1;
        }
        for (; mask < P; mask <<= 1) {
            if (v + mask >= P)
                continue;
            TaskId snd = f.add(Task::send(bytes, comm[(v + mask + root) % P], tag));
            for (TaskId l : last)
                f.require(snd, l);
            last = {snd};
        }
    }
}

void linear_bcast(std::vector<Fragment>& out, const std::vector<Rank>& comm, Bytes bytes, Tag tag, std::size_t root) {
    const std::size_t P = comm.size();
    for (std::size_t k = 1; k < P; ++k) {
        const std::size_t i = (root + k) % P;
        out[root].add(Task::send(bytes, comm[i], tag));
        out[i].add(Task::recv(bytes, comm[root], tag));
    }
}

void ring_bcast(std::vector<Fragment>& out, const std::vector<Rank>& comm, Bytes bytes, Tag tag, std::size_t root) {
    const std::size_t P = comm.size();
    for (std::size_t k = 0; k < P; ++k) {
        const std::size_t i = (root + k) % P;
        Fragment& f = out[i];
        const Rank next = comm[(i + 1) % P];
        if (k == 0) {
            f.add(Task::send(bytes, next, tag));
            continue;
        }
        TaskId rcv = f.add(Task::recv(bytes, comm[(i + P - 1) % P], tag));
        if (k + 1 < P) {
            TaskId snd = f.add(Task::send(bytes, next, tag));
            f.require(snd, rcv);
        }
    }
}

void linear_alltoall(std::vector<Fragment>& out, const std::vector<Rank>& comm, Bytes block, Tag tag) {
    const std::size_t P = comm.size();
    for (std::size_t i = 0; i < P; ++i)
        for (std::size_t k = 1; k < P; ++k) {
            out[i].add(Task::send(block, comm[(i + k) % P], tag));
            out[i].add(Task::recv(block, comm[(i + P - k) % P], tag));
        }
}

} // namespace

std::string_view to_string(MpiOp op) {
    switch (op) {
    case MpiOp::Send: return "SEND";
    case MpiOp::Recv: return "RECV";
    case MpiOp::Allreduce: return "ALLREDUCE";
    case MpiOp::Bcast: return "BCAST";
    case MpiOp::ReduceScatter: return "REDUCE_SCATTER";
    case MpiOp::Allgather: return "ALLGATHER";
    case MpiOp::Alltoall: return "ALLTOALL";
    case MpiOp::Barrier: return "BARRIER";
    }
    return "?";
}

std::string_view to_string(Algo algo) {
    switch (algo) {
    case Algo::Ring: return "ring";
    case Algo::RecursiveDoubling: return "recursive_doubling";
    case Algo::BinomialTree: return "binomial_tree";
    case Algo::Linear: return "linear";
    }
    return "?";
}

MpiOp parse_op(std::string_view name) {
    const std::string n = lower(name);
    for (MpiOp op : {MpiOp::Send, MpiOp::Recv, MpiOp::Allreduce, MpiOp::Bcast, MpiOp::ReduceScatter,
                     MpiOp::Allgather, MpiOp::Alltoall, MpiOp::Barrier})
        if (lower(to_string(op)) == n)
            return op;
    throw InvalidArgument("unknown MPI operation '" + std::string(name) + "'");
}

Algo parse_algo(std::string_view name) {
    const std::string n = lower(name);
    for (Algo a : {Algo::Ring, Algo::RecursiveDoubling, Algo::BinomialTree, Algo::Linear})
        if (to_string(a) == n)
            return a;
    throw InvalidArgument("unknown collective algorithm '" + std::string(name) + "'");
}

bool is_collective(MpiOp op) { return op != MpiOp::Send && op != MpiOp::Recv; }

bool supported(MpiOp op, Algo algo) {
    switch (op) {
    case MpiOp::Allreduce: return algo == Algo::Ring || algo == Algo::RecursiveDoubling;
    case MpiOp::Bcast: return algo == Algo::BinomialTree || algo == Algo::Linear || algo == Algo::Ring;
    case MpiOp::ReduceScatter:
    case MpiOp::Allgather: return algo == Algo::Ring;
    case MpiOp::Alltoall: return algo == Algo::Linear;
    case MpiOp::Barrier: return algo == Algo::RecursiveDoubling;
    default: return false;
    }
}

std::vector<Fragment> expand_collective(MpiOp op, const std::vector<Rank>& comm, Bytes bytes, Algo algo, Tag tag,
                                        Rank root, const CollectiveOptions& opts) {
    if (!is_collective(op))
        throw InvalidArgument(std::string(to_string(op)) + " is not a collective");
    if (!supported(op, algo))
        throw InvalidArgument("unsupported algorithm " + std::string(to_string(algo)) + " for " +
                              std::string(to_string(op)));
    const std::size_t P = comm.size();
    if (P < 2)
        throw InvalidArgument(std::string(to_string(op)) + " needs at least 2 ranks");
    std::unordered_set<Rank> seen(comm.begin(), comm.end());
    if (seen.size() != P)
        throw InvalidArgument("communicator lists a rank twice");
    std::vector<Fragment> out(P);
    switch (op) {
    case MpiOp::Allreduce:
        if (algo == Algo::Ring)
            ring_steps(out, comm, 2 * (P - 1), ceil_div(bytes, P), tag, P - 1, opts);
        else
            recursive_doubling(out, comm, bytes, tag, reduce_cost(bytes, opts));
        break;
    case MpiOp::ReduceScatter:
        ring_steps(out, comm, P - 1, ceil_div(bytes, P), tag, P - 1, opts);
        break;
    case MpiOp::Allgather:
        ring_steps(out, comm, P - 1, ceil_div(bytes, P), tag, 0, opts);
        break;
    case MpiOp::Alltoall:
        linear_alltoall(out, comm, ceil_div(bytes, P), tag);
        break;
    case MpiOp::Barrier:
        recursive_doubling(out, comm, 1, tag, 0);
        break;
    case MpiOp::Bcast: {
        auto it = std::find(comm.begin(), comm.end(), root);
        if (it == comm.end())
            throw InvalidArgument("bcast root " + std::to_string(root) + " is not in the communicator");
        const auto r = static_cast<std::size_t>(it - comm.begin());
        if (algo == Algo::BinomialTree)
            binomial_bcast(out, comm, bytes, tag, r);
        else if (algo == Algo::Linear)
            linear_bcast(out, comm, bytes, tag, r);
        else
            ring_bcast(out, comm, bytes, tag, r);
        break;
    }
    default:
        break;
    }
    return out;
}

std::vector<Bytes> analytic_bytes_sent(MpiOp op, std::size_t P, Bytes bytes, Algo algo, std::size_t root_pos) {
    std::vector<Bytes> out(P, 0);
    const Bytes chunk = ceil_div(bytes, P);
    switch (op) {
    case MpiOp::Allreduce:
        for (auto& b : out)
            b = algo == Algo::Ring ? 2 * (P - 1) * chunk : log2_floor(P) * bytes;
        break;
    case MpiOp::ReduceScatter:
    case MpiOp::Allgather:
    case MpiOp::Alltoall:
        for (auto& b : out)
            b = (P - 1) * chunk;
        break;
    case MpiOp::Barrier:
        for (auto& b : out)
            b = log2_floor(P);
        break;
    case MpiOp::Bcast:
        if (algo == Algo::Linear) {
            out[root_pos] = (P - 1) * bytes;
        } else if (algo == Algo::Ring) {
            for (std::size_t k = 0; k + 1 < P; ++k)
                out[(root_pos + k) % P] = bytes;
        } else {
            // v sends to v + 2^j for every 2^j above its highest set bit
            for (std::size_t v = 0; v < P; ++v) {
                std::size_t mask = v ? (std::size_t{1} << log2_floor(v)) << 1 : 1;
                for (; mask < P; mask <<= 1)
                    if (v + mask < P)
                        out[(v + root_pos) % P] += bytes;
            }
        }
        break;
    default:
        break;
    }
    return out;
}

goal::GoalSchedule gen_collective(MpiOp op, std::size_t P, Bytes bytes, Algo algo, Rank root,
                                  const CollectiveOptions& opts) {
    std::vector<Rank> comm(P);
    for (std::size_t i = 0; i < P; ++i)
        comm[i] = static_cast<Rank>(i);
    auto frags = expand_collective(op, comm, bytes, algo, 0, root, opts);
    goal::GoalSchedule s(P);
    for (std::size_t i = 0; i < P; ++i) {
        goal::splice(s.ranks[i], frags[i], {});
        s.ranks[i].canonicalize();
    }
    return s;
}

} // namespace goalnet::schedgen
