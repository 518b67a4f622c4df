#include <algorithm>
#include <cmath>
#include <set>

#include "goalnet/nccl/nccl.hpp"

namespace goalnet::nccl {

using goal::Fragment;
using goal::RankGraph;
using goal::RankSchedule;
using goal::Task;

namespace {

Bytes ceil_div(Bytes a, Bytes b) { return a / b + (a % b != 0); }

std::vector<Bytes> chunks(Bytes total, Bytes slot) {
    std::vector<Bytes> out;
    for (Bytes done = 0; done < total; done += slot)
        out.push_back(std::min(slot, total - done));
    return out;
}

struct ChannelPlan {
    Bytes slot;
    double factor;
    Bytes wire(Bytes payload) const {
        if (factor == 1.0)
            return payload;
        return static_cast<Bytes>(std::llround(static_cast<double>(payload) * factor));
    }
};

void broadcast_channel(std::vector<Fragment>& out, const std::vector<GpuId>& ring, std::size_t root, Bytes share,
                       const ChannelPlan& plan, Tag tag) {
    const std::size_t P = ring.size();
    const auto payloads = chunks(share, plan.slot);
    for (std::size_t k = 0; k < P; ++k) {
        const std::size_t i = (root + k) % P;
        Fragment& f = out[i];
        const GpuId next = ring[(i + 1) % P];
        const GpuId prev = ring[(i + P - 1) % P];
        const bool receives = k > 0;
        const bool forwards = k + 1 < P;
        std::optional<TaskId> last_send, last_recv;
        for (Bytes p : payloads) {
            std::optional<TaskId> rcv;
            if (receives) {
                rcv = f.add(Task::recv(plan.wire(p), prev, tag));
                if (last_recv)
                    f.require(*rcv, *last_recv);
                last_recv = rcv;
            }
            if (forwards) {
                TaskId snd = f.add(Task::send(plan.wire(p), next, tag));
                if (last_send)
                    f.require(snd, *last_send);
                if (rcv)
                    f.require(snd, *rcv);
                last_send = snd;
            }
        }
    }
}

void ring_channel(std::vector<Fragment>& out, const std::vector<GpuId>& ring, std::size_t steps, Bytes share,
                  const ChannelPlan& plan, Tag tag) {
    const std::size_t P = ring.size();
    const auto payloads = chunks(ceil_div(share, P), plan.slot);
    for (std::size_t i = 0; i < P; ++i) {
        Fragment& f = out[i];
        const GpuId next = ring[(i + 1) % P];
        const GpuId prev = ring[(i + P - 1) % P];
        std::optional<TaskId> last_send, last_recv;
        std::vector<TaskId> prev_step_recvs, step_recvs;
        for (std::size_t s = 0; s < steps; ++s) {
            step_recvs.clear();
            for (std::size_t j = 0; j < payloads.size(); ++j) {
                const Bytes w = plan.wire(payloads[j]);
                TaskId snd = f.add(Task::send(w, next, tag));
                if (last_send)
                    f.require(snd, *last_send);
                if (s > 0)
                    f.require(snd, prev_step_recvs[j]); // forward what arrived last step
                last_send = snd;
                TaskId rcv = f.add(Task::recv(w, prev, tag));
                if (last_recv)
                    f.require(rcv, *last_recv);
                last_recv = rcv;
                step_recvs.push_back(rcv);
            }
            prev_step_recvs.swap(step_recvs);
        }
    }
}

} // namespace

void NcclConfig::check() const {
    if (nchannels < 1 || nchannels > kMaxChannels)
        throw InvalidArgument("nchannels must be in [1, 64], got " + std::to_string(nchannels));
    if (slot_bytes_simple == 0 || slot_bytes_ll == 0)
        throw InvalidArgument("slot sizes must be positive");
    if (!(ll_wire_factor >= 1.0))
        throw InvalidArgument("LL wire factor must be >= 1");
}

std::vector<GpuId> ring_order(const std::vector<GpuId>& members, const NcclConfig& cfg) {
    std::vector<GpuId> out = members;
    if (cfg.ring_order.empty()) {
        std::sort(out.begin(), out.end());
        return out;
    }
    auto pos = [&](GpuId g) {
        auto it = std::find(cfg.ring_order.begin(), cfg.ring_order.end(), g);
        if (it == cfg.ring_order.end())
            throw InvalidArgument("GPU " + std::to_string(g) + " missing from the configured ring order");
        return it - cfg.ring_order.begin();
    };
    std::sort(out.begin(), out.end(), [&](GpuId a, GpuId b) { return pos(a) < pos(b); });
    return out;
}

std::vector<Fragment> decompose_collective(NcclOp op, const std::vector<GpuId>& ring, Bytes bytes,
                                           const NcclConfig& cfg, Tag tag_base, GpuId root) {
    cfg.check();
    const std::size_t P = ring.size();
    if (P < 2)
        throw InvalidArgument(std::string(to_string(op)) + " needs a communicator of at least 2 GPUs");
    const ChannelPlan plan{cfg.proto == Proto::LL ? cfg.slot_bytes_ll : cfg.slot_bytes_simple,
                           cfg.proto == Proto::LL ? cfg.ll_wire_factor : 1.0};
    const Bytes share = ceil_div(bytes, cfg.nchannels);
    std::vector<Fragment> out(P);
    for (std::uint32_t c = 0; c < cfg.nchannels; ++c) {
        const Tag tag = tag_base + c;
        switch (op) {
        case NcclOp::Broadcast: {
            auto it = std::find(ring.begin(), ring.end(), root);
            if (it == ring.end())
                throw InvalidArgument("broadcast root " + std::to_string(root) + " is not in the communicator");
            broadcast_channel(out, ring, static_cast<std::size_t>(it - ring.begin()), share, plan, tag);
            break;
        }
        case NcclOp::Allreduce:
            ring_channel(out, ring, 2 * (P - 1), share, plan, tag);
            break;
        case NcclOp::Allgather:
        case NcclOp::ReduceScatter:
            ring_channel(out, ring, P - 1, share, plan, tag);
            break;
        }
    }
    return out;
}

StreamDags build_stream_dags(const GpuTrace& t) {
    StreamDags out;
    // k-th collective on comm C at a GPU, ordered by start time then stream
    struct Ref {
        const GpuKernelEvent* e;
        TaskId placeholder;
    };
    std::map<GpuId, std::map<std::string, std::vector<Ref>>> per_gpu_comm;
    for (const auto& [gpu, streams] : t.gpus) {
        GpuDag g;
        g.gpu = gpu;
        g.dag.rank = gpu;
        RankSchedule& rs = g.dag;
        const TaskId root = rs.add(Task::calc(0));
        std::vector<TaskId> tails;
        std::vector<std::pair<const GpuKernelEvent*, TaskId>> colls;
        std::uint16_t cpu = 0;
        for (const auto& st : streams) {
            if (st.events.empty())
                continue;
            TaskId prev = root;
            for (std::size_t k = 0; k < st.events.size(); ++k) {
                const auto& e = st.events[k];
                if (k > 0) {
                    TaskId gap = rs.add(Task::calc(std::max<TimeNs>(0, e.ts - st.events[k - 1].te), cpu));
                    rs.require(gap, prev);
                    prev = gap;
                }
                TaskId id = rs.add(Task::calc(e.compute ? e.te - e.ts : 0, cpu));
                rs.require(id, prev);
                prev = id;
                if (!e.compute)
                    colls.push_back({&e, id});
            }
            tails.push_back(prev);
            ++cpu;
        }
        const TaskId sink = rs.add(Task::calc(0));
        if (tails.empty())
            rs.require(sink, root);
        for (TaskId tl : tails)
            rs.require(sink, tl);
        g.num_streams = cpu;
        std::stable_sort(colls.begin(), colls.end(), [](const auto& a, const auto& b) { return a.first->ts < b.first->ts; });
        for (const auto& [e, id] : colls)
            per_gpu_comm[gpu][e->comm].push_back({e, id});
        out.gpus.push_back(std::move(g));
    }
    // cross-check and number instances over sorted (comm, k)
    std::map<std::pair<std::string, std::size_t>, const GpuKernelEvent*> instances;
    for (const auto& [comm, members] : t.communicators) {
        std::optional<std::pair<GpuId, std::size_t>> ref;
        for (GpuId m : members) {
            const std::vector<Ref>* seq = nullptr;
            if (auto it = per_gpu_comm.find(m); it != per_gpu_comm.end())
                if (auto jt = it->second.find(comm); jt != it->second.end())
                    seq = &jt->second;
            const std::size_t n = seq ? seq->size() : 0;
            if (!ref) {
                ref = {m, n};
            } else if (ref->second != n) {
                throw InvalidArgument("communicator '" + comm + "': GPU " + std::to_string(ref->first) + " issued " +
                                      std::to_string(ref->second) + " collective(s) but GPU " + std::to_string(m) +
                                      " issued " + std::to_string(n));
            }
            for (std::size_t k = 0; k < n; ++k) {
                const auto* e = (*seq)[k].e;
                auto [it, fresh] = instances.emplace(std::make_pair(comm, k), e);
                const auto* a = it->second;
                if (!fresh && (a->op != e->op || a->bytes != e->bytes || (a->op == NcclOp::Broadcast && a->root != e->root)))
                    throw InvalidArgument("communicator '" + comm + "' collective #" + std::to_string(k) + ": GPU " +
                                          std::to_string(a->gpu) + " and GPU " + std::to_string(e->gpu) +
                                          " disagree on op, size or root");
            }
        }
    }
    std::map<std::pair<std::string, std::size_t>, std::size_t> index;
    for (const auto& [key, e] : instances) {
        index[key] = out.instances.size();
        const Tag base = kNcclTagBase + static_cast<Tag>(out.instances.size()) * kMaxChannels;
        out.instances.push_back({e->op, e->bytes, e->comm, e->root, base});
    }
    for (auto& g : out.gpus)
        if (auto it = per_gpu_comm.find(g.gpu); it != per_gpu_comm.end())
            for (const auto& [comm, seq] : it->second)
                for (std::size_t k = 0; k < seq.size(); ++k)
                    g.placeholders[seq[k].placeholder] = index.at({comm, k});
    return out;
}

std::vector<GpuDag> decompose_all(const StreamDags& dags, const GpuTrace& t, const NcclConfig& cfg) {
    cfg.check();
    // fragments per instance, keyed by GPU id
    std::vector<std::map<GpuId, Fragment>> frags(dags.instances.size());
    for (std::size_t i = 0; i < dags.instances.size(); ++i) {
        const auto& inst = dags.instances[i];
        const auto ring = ring_order(t.communicators.at(inst.comm), cfg);
        auto parts = decompose_collective(inst.op, ring, inst.bytes, cfg, inst.tag_base, inst.root);
        for (std::size_t p = 0; p < ring.size(); ++p)
            frags[i][ring[p]] = std::move(parts[p]);
    }
    std::vector<GpuDag> out;
    for (const auto& g : dags.gpus) {
        GpuDag d;
        d.gpu = g.gpu;
        d.num_streams = g.num_streams;
        d.dag.rank = g.gpu;
        const auto& src = g.dag;
        std::vector<std::vector<TaskId>> roots(src.tasks.size()), sinks(src.tasks.size());
        for (TaskId id = 0; id < src.tasks.size(); ++id) {
            auto ph = g.placeholders.find(id);
            const Fragment* f = ph == g.placeholders.end() ? nullptr : &frags[ph->second].at(g.gpu);
            if (!f || f->tasks.empty()) {
                TaskId n = d.dag.add(src.tasks[id]);
                roots[id] = sinks[id] = {n};
                continue;
            }
            const auto base = static_cast<TaskId>(d.dag.tasks.size());
            std::vector<bool> has_pred(f->tasks.size()), has_succ(f->tasks.size());
            for (auto t : f->tasks) {
                t.cpu = src.tasks[id].cpu;
                d.dag.add(std::move(t));
            }
            for (const auto& dep : f->deps) {
                d.dag.deps.push_back({base + dep.before, base + dep.after});
                has_pred[dep.after] = true;
                has_succ[dep.before] = true;
            }
            for (TaskId k = 0; k < f->tasks.size(); ++k) {
                if (!has_pred[k])
                    roots[id].push_back(base + k);
                if (!has_succ[k])
                    sinks[id].push_back(base + k);
            }
        }
        for (const auto& dep : src.deps)
            for (TaskId a : sinks[dep.before])
                for (TaskId b : roots[dep.after])
                    d.dag.deps.push_back({a, b});
        d.dag.canonicalize();
        out.push_back(std::move(d));
    }
    return out;
}

std::size_t GpuNodeMap::num_nodes() const {
    std::size_t n = 0;
    for (const auto& [g, nl] : gpu)
        n = std::max<std::size_t>(n, nl.first + 1);
    return n;
}

GpuNodeMap GpuNodeMap::blocked(const std::vector<GpuId>& gpus, std::size_t gpus_per_node) {
    if (gpus_per_node == 0)
        throw InvalidArgument("gpus per node must be positive");
    GpuNodeMap m;
    std::vector<GpuId> sorted = gpus;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        m.gpu[sorted[i]] = {static_cast<Rank>(i / gpus_per_node), static_cast<std::uint16_t>(i % gpus_per_node)};
    return m;
}

TimeNs intra_node_ns(Bytes bytes, const GpuNodeMap& m) {
    if (!(m.intra_bandwidth_GBps > 0))
        throw InvalidArgument("intra-node bandwidth must be positive");
    // 1 GB/s moves one byte per ns
    return m.intra_latency_ns + static_cast<TimeNs>(std::llround(static_cast<double>(bytes) / m.intra_bandwidth_GBps));
}

goal::GoalSchedule map_gpus_to_nodes(const std::vector<GpuDag>& dags, const GpuNodeMap& m) {
    auto where = [&](GpuId g) -> const std::pair<Rank, std::uint16_t>& {
        auto it = m.gpu.find(g);
        if (it == m.gpu.end())
            throw InvalidArgument("GPU " + std::to_string(g) + " is missing from the GPU-to-node map");
        return it->second;
    };
    const std::size_t nodes = m.num_nodes();
    if (nodes == 0)
        throw InvalidArgument("GPU-to-node map is empty");
    // inter-node channels get fresh tags per (src gpu, dst gpu, tag) so that
    // two GPU pairs sharing a node pair never match each other's messages
    std::set<std::tuple<GpuId, GpuId, Tag>> keys;
    for (const auto& d : dags)
        for (const auto& t : d.dag.tasks)
            if (t.is_comm() && where(d.gpu).first != where(t.peer).first)
                keys.insert(t.kind == goal::TaskKind::Send ? std::make_tuple(d.gpu, t.peer, t.tag)
                                                           : std::make_tuple(t.peer, d.gpu, t.tag));
    std::map<std::tuple<GpuId, GpuId, Tag>, Tag> retag;
    for (const auto& k : keys)
        retag[k] = kNcclTagBase + static_cast<Tag>(retag.size());

    // GPUs per node in local-index order, for dense cpu numbering
    std::vector<std::vector<const GpuDag*>> on_node(nodes);
    for (const auto& d : dags)
        on_node[where(d.gpu).first].push_back(&d);
    goal::GoalSchedule s(nodes);
    for (Rank n = 0; n < nodes; ++n) {
        auto& list = on_node[n];
        std::stable_sort(list.begin(), list.end(),
                         [&](const GpuDag* a, const GpuDag* b) { return where(a->gpu).second < where(b->gpu).second; });
        RankSchedule& rs = s.ranks[n];
        const TaskId root = rs.add(Task::calc(0));
        std::vector<TaskId> tails;
        std::uint32_t cpu_offset = 0;
        for (const GpuDag* d : list) {
            const std::uint16_t local = where(d->gpu).second;
            const auto base = static_cast<TaskId>(rs.tasks.size());
            for (const auto& t0 : d->dag.tasks) {
                Task t = t0;
                if (cpu_offset + t.cpu > 0xffff)
                    throw InvalidArgument("node " + std::to_string(n) + " needs more than 65536 compute streams");
                t.cpu = static_cast<std::uint16_t>(cpu_offset + t.cpu);
                if (t.is_comm()) {
                    const Rank peer_node = where(t.peer).first;
                    if (peer_node == n) {
                        Task c = Task::calc(intra_node_ns(t.bytes, m), t.cpu);
                        c.label = t.label;
                        t = std::move(c);
                    } else {
                        t.tag = retag.at(t.kind == goal::TaskKind::Send ? std::make_tuple(d->gpu, t.peer, t.tag)
                                                                        : std::make_tuple(t.peer, d->gpu, t.tag));
                        t.peer = peer_node;
                        t.nic = local;
                    }
                }
                rs.add(std::move(t));
            }
            for (const auto& dep : d->dag.deps)
                rs.deps.push_back({base + dep.before, base + dep.after});
            RankGraph g(d->dag);
            for (TaskId r : g.roots())
                rs.require(base + r, root);
            for (TaskId k : g.sinks())
                tails.push_back(base + k);
            cpu_offset += std::max<std::uint16_t>(d->num_streams, 1);
        }
        const TaskId sink = rs.add(Task::calc(0));
        if (tails.empty())
            rs.require(sink, root);
        for (TaskId t : tails)
            rs.require(sink, t);
        rs.canonicalize();
    }
    return s;
}

goal::GoalSchedule nccl_to_goal(const GpuTrace& t, const NcclConfig& cfg, const GpuNodeMap& m) {
    return map_gpus_to_nodes(decompose_all(build_stream_dags(t), t, cfg), m);
}

} // namespace goalnet::nccl
