#include "goalnet/packet/backend.hpp"

#include <algorithm>
#include <cmath>

namespace goalnet::packet {

using goal::TaskKind;

namespace {

constexpr std::uint8_t kEverSent = 1, kInFlight = 2, kAcked = 4;

TimeNs ceil_ns(TimePs ps) { return ps >= 0 ? (ps + 999) / 1000 : -((-ps) / 1000); }

} // namespace

void PacketNetConfig::check() const {
    fattree.check();
    if (mtu_bytes == 0)
        throw InvalidArgument("net.mtu must be positive");
    if (mtu_bytes + header_bytes > queue_capacity_bytes)
        throw InvalidArgument("a full packet (" + std::to_string(mtu_bytes + header_bytes) +
                              " B) does not fit the queue capacity (" + std::to_string(queue_capacity_bytes) + " B)");
    if (ack_bytes == 0)
        throw InvalidArgument("ack size must be positive");
    if (!(ecn_kmin_frac >= 0 && ecn_kmin_frac <= ecn_kmax_frac && ecn_kmax_frac <= 1))
        throw InvalidArgument("ECN thresholds must satisfy 0 <= kmin <= kmax <= 1");
    if (rto_ns <= 0)
        throw InvalidArgument("retransmission timeout must be positive");
    if (sample_ns < 0)
        throw InvalidArgument("queue sampling period must be non-negative");
    if (!(swift.beta > 0 && swift.beta <= 1 && swift.beta_max > 0 && swift.beta_max < 1))
        throw InvalidArgument("swift beta must be in (0, 1] and beta_max in (0, 1)");
    if (swift.hop_delay_ns < 0)
        throw InvalidArgument("swift hop delay must be non-negative");
}

PacketBackend::PacketBackend(PacketNetConfig cfg) : _cfg(std::move(cfg)), _tree(_cfg.fattree), _rng(_cfg.seed) {
    _cfg.check();
}

void PacketBackend::setup(const goal::GoalSchedule& schedule) {
    if (schedule.num_ranks() > _tree.num_hosts())
        throw InvalidArgument("schedule has " + std::to_string(schedule.num_ranks()) + " ranks but the fat tree has " +
                              std::to_string(_tree.num_hosts()) + " hosts");
    _rng = Rng(_cfg.seed);
    _ports.clear();
    for (std::uint32_t l = 0; l < _tree.links().size(); ++l) {
        Port p;
        p.st.name = _tree.links()[l].name;
        p.st.capacity = _tree.is_host(_tree.links()[l].from) ? 0 : _cfg.queue_capacity_bytes;
        p.to = _tree.links()[l].to;
        _ports.push_back(std::move(p));
    }
    _pool.clear();
    _free.clear();
    _flows.clear();
    _posts.clear();
    _matcher = {};
    _cal = {};
    _done = {};
    _cpu_free.assign(schedule.num_ranks(), {});
    _records.clear();
    _samples.clear();
    _serial = 0;
    _cons = {};
    _data_packets = _ack_packets = _retransmits = _timeouts = _marks = 0;
}

TimeNs& PacketBackend::cpu(Rank r, std::uint16_t c) {
    auto& v = _cpu_free.at(r);
    if (v.size() <= c)
        v.resize(c + 1, 0);
    return v[c];
}

void PacketBackend::post_send(const sim::Post& p) {
    if (p.peer >= _cpu_free.size())
        throw InvalidArgument("send to rank " + std::to_string(p.peer) + " outside the schedule");
    if (p.peer == p.handle.rank)
        throw InvalidArgument("rank " + std::to_string(p.peer) + " sends to itself");
    _posts.push_back(p);
    _cal.push(p.t_ready * 1000, {Ev::Send, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void PacketBackend::post_recv(const sim::Post& p) {
    _posts.push_back(p);
    _cal.push(p.t_ready * 1000, {Ev::Recv, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void PacketBackend::post_calc(const sim::Post& p) {
    _posts.push_back(p);
    _cal.push(p.t_ready * 1000, {Ev::Calc, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void PacketBackend::complete(const sim::Handle& h, TimePs t, TaskKind kind) {
    _done.push({h, ceil_ns(t), kind});
}

std::optional<sim::Completion> PacketBackend::next_completion() {
    while (!_cal.empty() && (_done.empty() || _cal.top_time() <= _done.top().time_ns * 1000)) {
        auto [t, e] = _cal.pop();
        process(t, e);
    }
    if (_done.empty())
        return std::nullopt;
    sim::Completion c = _done.top();
    _done.pop();
    return c;
}

void PacketBackend::process(TimePs t, const Event& e) {
    switch (e.kind) {
    case Ev::Calc: {
        const sim::Post& p = _posts[e.index];
        if (p.duration_ns == 0) {
            complete(p.handle, t, TaskKind::Calc);
            break;
        }
        TimeNs& c = cpu(p.handle.rank, p.cpu);
        c = std::max(t / 1000, c) + p.duration_ns;
        _done.push({p.handle, c, TaskKind::Calc});
        break;
    }
    case Ev::Send: {
        const sim::Post& p = _posts[e.index];
        const auto f = static_cast<std::uint32_t>(_flows.size());
        Flow fl;
        fl.st.send = p.handle;
        fl.st.src = p.handle.rank;
        fl.st.dst = p.peer;
        fl.st.tag = p.tag;
        fl.st.bytes = p.bytes;
        _flows.push_back(std::move(fl));
        if (auto r = _matcher.post_send({p.handle.rank, p.peer, p.tag}, f))
            _flows[f].recv = _posts[*r];
        start_flow(t, f);
        break;
    }
    case Ev::Recv: {
        const sim::Post& p = _posts[e.index];
        if (auto f = _matcher.post_recv({p.peer, p.handle.rank, p.tag}, e.index)) {
            _flows[*f].recv = p;
            maybe_finish_recv(t, *f);
        }
        break;
    }
    case Ev::TxDone:
        _ports[e.index].busy = false;
        start_tx(t, e.index);
        break;
    case Ev::Arrive: {
        const Packet& p = _pool[e.index];
        if (_tree.is_host(e.node)) {
            if (p.ack)
                on_ack(t, e.index);
            else
                on_data(t, e.index);
        } else {
            enqueue(t, _tree.next_link(e.node, p.dst, p.uplink), e.index);
        }
        break;
    }
    case Ev::Rto:
        on_rto(t, e.index);
        break;
    }
}

std::uint32_t PacketBackend::pick_uplink(std::uint32_t src, std::uint32_t dst, std::uint64_t key) const {
    if (_tree.tor_of(src) == _tree.tor_of(dst))
        return 0;
    return static_cast<std::uint32_t>(mix_hash(mix_hash(mix_hash(_cfg.seed, src), dst), key) %
                                      _tree.spec().uplinks_per_tor);
}

void PacketBackend::start_flow(TimePs t, std::uint32_t f) {
    Flow& fl = _flows[f];
    const Bytes mtu = _cfg.mtu_bytes;
    fl.st.packets = static_cast<std::uint32_t>(std::max<Bytes>(1, (fl.st.bytes + mtu - 1) / mtu));
    fl.sent.assign(fl.st.packets, 0);
    fl.got.assign(fl.st.packets, false);
    fl.uplink = pick_uplink(fl.st.src, fl.st.dst, f);
    const auto hops = static_cast<TimePs>(_tree.path(fl.st.src, fl.st.dst, fl.uplink).size());
    const Bytes first = std::min(fl.st.bytes, mtu) + _cfg.header_bytes;
    fl.st.base_rtt_ps = hops * (_tree.serialize_ps(first) + _tree.serialize_ps(_cfg.ack_bytes) + 2 * _tree.latency_ps());
    fl.st.target_rtt_ps = fl.st.base_rtt_ps + hops * _cfg.swift.hop_delay_ns * 1000;
    // start at one bandwidth-delay product
    const TimePs full = _tree.serialize_ps(mtu + _cfg.header_bytes);
    fl.st.cc.cwnd = std::max(1.0, std::ceil(static_cast<double>(fl.st.base_rtt_ps) / static_cast<double>(full)));
    fl.st.start_ps = t;
    fl.last_progress_ps = t;
    try_send(t, f);
}

std::uint32_t PacketBackend::new_packet(const Packet& p) {
    if (!_free.empty()) {
        const std::uint32_t id = _free.back();
        _free.pop_back();
        _pool[id] = p;
        return id;
    }
    _pool.push_back(p);
    return static_cast<std::uint32_t>(_pool.size() - 1);
}

void PacketBackend::free_packet(std::uint32_t id) { _free.push_back(id); }

void PacketBackend::try_send(TimePs t, std::uint32_t f) {
    Flow& fl = _flows[f];
    const auto limit = static_cast<std::uint32_t>(std::max(1.0, std::floor(fl.st.cc.cwnd)));
    while (fl.outstanding < limit) {
        while (fl.next_seq < fl.st.packets && (fl.sent[fl.next_seq] & (kAcked | kInFlight)))
            ++fl.next_seq;
        if (fl.next_seq >= fl.st.packets)
            break;
        const std::uint32_t seq = fl.next_seq++;
        if (fl.sent[seq] & kEverSent) {
            ++fl.st.retransmits;
            ++_retransmits;
        }
        fl.sent[seq] |= kEverSent | kInFlight;
        ++fl.outstanding;
        ++fl.st.packets_sent;
        const Bytes offset = Bytes{seq} * _cfg.mtu_bytes;
        const Bytes payload = std::min(_cfg.mtu_bytes, fl.st.bytes - std::min(fl.st.bytes, offset));
        Packet p;
        p.flow = f;
        p.seq = seq;
        p.src = fl.st.src;
        p.dst = fl.st.dst;
        p.uplink = _cfg.routing == Routing::PacketSpray ? pick_uplink(p.src, p.dst, ++_serial) : fl.uplink;
        p.wire = payload + _cfg.header_bytes;
        p.sent_ps = t;
        ++_cons.injected;
        ++_data_packets;
        enqueue(t, _tree.host_up(p.src), new_packet(p));
    }
    if (fl.outstanding > 0)
        arm_timer(f);
}

void PacketBackend::arm_timer(std::uint32_t f) {
    Flow& fl = _flows[f];
    if (fl.timer)
        return;
    fl.timer = true;
    _cal.push(fl.last_progress_ps + _cfg.rto_ns * 1000, {Ev::Rto, f});
}

void PacketBackend::on_rto(TimePs t, std::uint32_t f) {
    Flow& fl = _flows[f];
    fl.timer = false;
    if (fl.send_done || fl.outstanding == 0)
        return;
    if (t - fl.last_progress_ps < _cfg.rto_ns * 1000) {
        arm_timer(f);
        return;
    }
    // go back to the first packet the receiver has not confirmed in order
    ++fl.st.timeouts;
    ++_timeouts;
    fl.st.cc.cwnd = std::max(1.0, fl.st.cc.cwnd / 2);
    for (auto& s : fl.sent)
        s &= static_cast<std::uint8_t>(~kInFlight);
    fl.outstanding = 0;
    fl.next_seq = fl.cum_acked;
    fl.last_progress_ps = t;
    try_send(t, f);
}

void PacketBackend::on_data(TimePs t, std::uint32_t id) {
    const Packet p = _pool[id];
    free_packet(id);
    ++_cons.delivered;
    Flow& fl = _flows[p.flow];
    if (!fl.got[p.seq]) {
        fl.got[p.seq] = true;
        while (fl.cum_rx < fl.st.packets && fl.got[fl.cum_rx])
            ++fl.cum_rx;
    }
    Packet a;
    a.flow = p.flow;
    a.seq = p.seq;
    a.cum = fl.cum_rx;
    a.src = p.dst;
    a.dst = p.src;
    a.uplink = _cfg.routing == Routing::PacketSpray ? pick_uplink(a.src, a.dst, ++_serial) : fl.uplink;
    a.wire = _cfg.ack_bytes;
    a.sent_ps = p.sent_ps;
    a.ack = true;
    a.ecn = p.ecn;
    ++_cons.injected;
    ++_ack_packets;
    enqueue(t, _tree.host_up(a.src), new_packet(a));
    if (fl.cum_rx == fl.st.packets && fl.st.delivered_ps < 0) {
        fl.st.delivered_ps = t;
        maybe_finish_recv(t, p.flow);
    }
}

void PacketBackend::on_ack(TimePs t, std::uint32_t id) {
    const Packet p = _pool[id];
    free_packet(id);
    ++_cons.delivered;
    Flow& fl = _flows[p.flow];
    ++fl.st.acks;
    if (p.ecn)
        ++fl.st.marked_acks;
    const TimePs rtt = t - p.sent_ps;
    fl.st.rtt_samples_ps.push_back(rtt);
    std::uint8_t& s = fl.sent[p.seq];
    if (!(s & kAcked)) {
        s |= kAcked;
        ++fl.acked_count;
        fl.last_progress_ps = t;
        if (s & kInFlight) {
            s &= static_cast<std::uint8_t>(~kInFlight);
            --fl.outstanding;
        }
    }
    fl.cum_acked = std::max(fl.cum_acked, p.cum);
    if (_cfg.cc == CongestionControl::Mprdma)
        mprdma_on_ack(fl.st.cc, p.ecn);
    else
        swift_on_ack(fl.st.cc, rtt, fl.st.target_rtt_ps, t, _cfg.swift);
    if (fl.acked_count == fl.st.packets && !fl.send_done) {
        fl.send_done = true;
        fl.st.acked_ps = t;
        complete(fl.st.send, t, TaskKind::Send);
    }
    if (!fl.send_done)
        try_send(t, p.flow);
}

void PacketBackend::maybe_finish_recv(TimePs t, std::uint32_t f) {
    Flow& fl = _flows[f];
    if (!fl.recv || fl.st.delivered_ps < 0 || fl.recv_done)
        return;
    fl.recv_done = true;
    complete(fl.recv->handle, std::max(t, fl.recv->t_ready * 1000), TaskKind::Recv);
    sim::MessageRecord rec;
    rec.send = fl.st.send;
    rec.recv = fl.recv->handle;
    rec.src = fl.st.src;
    rec.dst = fl.st.dst;
    rec.tag = fl.st.tag;
    rec.bytes = fl.st.bytes;
    rec.send_ready_ns = ceil_ns(fl.st.start_ps);
    rec.delivered_ns = ceil_ns(fl.st.delivered_ps);
    _records.push_back(rec);
}

void PacketBackend::sample(Port& p, TimePs t) {
    const TimePs period = _cfg.sample_ns * 1000;
    if (period == 0 || p.next_sample_ps > t)
        return;
    if (p.queued == 0) {
        p.next_sample_ps += ((t - p.next_sample_ps) / period + 1) * period;
        return;
    }
    for (; p.next_sample_ps <= t; p.next_sample_ps += period)
        _samples.push_back({p.next_sample_ps / 1000, p.st.name, p.queued});
}

void PacketBackend::enqueue(TimePs t, std::uint32_t port, std::uint32_t id) {
    Port& P = _ports[port];
    Packet& p = _pool[id];
    if (p.ack) {
        P.acks.push_back(id);
    } else {
        if (P.st.capacity > 0 && P.queued + p.wire > P.st.capacity) {
            ++P.st.drops;
            ++_cons.dropped;
            free_packet(id);
            return;
        }
        // linear marking ramp between kmin and kmax
        const double q = static_cast<double>(P.queued);
        const double cap = static_cast<double>(_cfg.queue_capacity_bytes);
        const double kmin = _cfg.ecn_kmin_frac * cap, kmax = _cfg.ecn_kmax_frac * cap;
        if (!p.ecn && q > kmin) {
            const bool mark = q >= kmax || _rng.uniform() < (q - kmin) / (kmax - kmin);
            if (mark) {
                p.ecn = true;
                ++P.st.marks;
                ++_marks;
            }
        }
        sample(P, t);
        P.data.push_back(id);
        P.queued += p.wire;
        P.st.max_queue_bytes = std::max(P.st.max_queue_bytes, P.queued);
    }
    if (!P.busy)
        start_tx(t, port);
}

void PacketBackend::start_tx(TimePs t, std::uint32_t port) {
    Port& P = _ports[port];
    std::uint32_t id;
    if (!P.acks.empty()) {
        id = P.acks.front();
        P.acks.pop_front();
    } else if (!P.data.empty()) {
        id = P.data.front();
        P.data.pop_front();
        sample(P, t);
        P.queued -= _pool[id].wire;
    } else {
        return;
    }
    const TimePs ser = _tree.serialize_ps(_pool[id].wire);
    P.busy = true;
    ++P.st.tx_packets;
    P.st.tx_bytes += _pool[id].wire;
    P.st.busy_ps += ser;
    if (P.st.first_tx_ps < 0)
        P.st.first_tx_ps = t;
    P.st.last_tx_end_ps = t + ser;
    _cal.push(t + ser, {Ev::TxDone, port});
    _cal.push(t + ser + _tree.latency_ps(), {Ev::Arrive, id, P.to});
}

std::vector<sim::Handle> PacketBackend::unmatched_sends() const {
    std::vector<sim::Handle> out;
    for (std::uint32_t f : _matcher.unmatched_sends())
        out.push_back(_flows[f].st.send);
    return out;
}

std::vector<FlowState> PacketBackend::flows() const {
    std::vector<FlowState> out;
    out.reserve(_flows.size());
    for (const auto& f : _flows)
        out.push_back(f.st);
    return out;
}

std::vector<PortStats> PacketBackend::port_stats() const {
    std::vector<PortStats> out;
    for (const auto& p : _ports)
        out.push_back(p.st);
    return out;
}

PacketBackend::Conservation PacketBackend::conservation() const {
    Conservation c = _cons;
    c.in_flight = _pool.size() - _free.size();
    return c;
}

sim::BackendStats PacketBackend::stats() const {
    sim::BackendStats s;
    const Conservation c = conservation();
    s.drops = c.dropped;
    s.queue_samples = _samples;
    std::stable_sort(s.queue_samples.begin(), s.queue_samples.end(),
                     [](const sim::QueueSample& a, const sim::QueueSample& b) { return a.time_ns < b.time_ns; });
    Bytes max_q = 0;
    for (const auto& p : _ports)
        if (p.st.capacity > 0)
            max_q = std::max(max_q, p.st.max_queue_bytes);
    auto add = [&](const std::string& k, double v) { s.counters.push_back({k, v}); };
    add("flows", static_cast<double>(_flows.size()));
    add("data_packets", static_cast<double>(_data_packets));
    add("ack_packets", static_cast<double>(_ack_packets));
    add("retransmits", static_cast<double>(_retransmits));
    add("timeouts", static_cast<double>(_timeouts));
    add("ecn_marks", static_cast<double>(_marks));
    add("packets_injected", static_cast<double>(c.injected));
    add("packets_delivered", static_cast<double>(c.delivered));
    add("packets_dropped", static_cast<double>(c.dropped));
    add("packets_in_flight", static_cast<double>(c.in_flight));
    add("max_switch_queue_bytes", static_cast<double>(max_q));
    for (const auto& p : _ports)
        if (p.st.drops > 0)
            add("drops." + p.st.name, static_cast<double>(p.st.drops));
    return s;
}

} // namespace goalnet::packet
