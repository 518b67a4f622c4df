#include "goalnet/loggops/backend.hpp"

#include <algorithm>

namespace goalnet::loggops {

using goal::TaskKind;

void LogGOPSBackend::setup(const goal::GoalSchedule& schedule) {
    _posts.clear();
    _msgs.clear();
    _matcher = {};
    _cal = {};
    _done = {};
    _records.clear();
    _rendezvous_count = 0;
    _cpu_busy = _nic_busy = 0;
    _cpu_free.assign(schedule.num_ranks(), {});
    _nic_free.assign(schedule.num_ranks(), {});
}

TimeNs& LogGOPSBackend::cpu(Rank r, std::uint16_t c) {
    auto& v = _cpu_free.at(r);
    if (v.size() <= c)
        v.resize(c + 1, 0);
    return v[c];
}

TimeNs& LogGOPSBackend::nic(Rank r, std::uint16_t n) {
    auto& v = _nic_free.at(r);
    if (v.size() <= n)
        v.resize(n + 1, 0);
    return v[n];
}

void LogGOPSBackend::post_send(const sim::Post& p) {
    _posts.push_back(p);
    _cal.push(p.t_ready, {Ev::Send, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void LogGOPSBackend::post_recv(const sim::Post& p) {
    _posts.push_back(p);
    _cal.push(p.t_ready, {Ev::Recv, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void LogGOPSBackend::post_calc(const sim::Post& p) {
    _posts.push_back(p);
    _cal.push(p.t_ready, {Ev::Calc, static_cast<std::uint32_t>(_posts.size() - 1)});
}

void LogGOPSBackend::complete(const sim::Post& p, TimeNs t, TaskKind kind) {
    _done.push({p.handle, t, kind});
}

std::optional<sim::Completion> LogGOPSBackend::next_completion() {
    while (!_cal.empty() && (_done.empty() || _cal.top_time() <= _done.top().time_ns)) {
        auto [t, e] = _cal.pop();
        process(t, e);
    }
    if (_done.empty())
        return std::nullopt;
    sim::Completion c = _done.top();
    _done.pop();
    return c;
}

void LogGOPSBackend::process(TimeNs t, const Event& e) {
    switch (e.kind) {
    case Ev::Calc: {
        const sim::Post& p = _posts[e.index];
        if (p.duration_ns == 0) {
            complete(p, t, TaskKind::Calc);
            break;
        }
        TimeNs& c = cpu(p.handle.rank, p.cpu);
        const TimeNs start = std::max(t, c);
        c = start + p.duration_ns;
        _cpu_busy += p.duration_ns;
        complete(p, c, TaskKind::Calc);
        break;
    }
    case Ev::Send:
        start_send(t, _posts[e.index]);
        break;
    case Ev::Recv:
        start_recv(t, e.index);
        break;
    case Ev::RtsArrive: {
        // receiver takes the RTS off the wire, then answers with a CTS
        Message& m = _msgs[e.index];
        TimeNs& c = cpu(m.recv.handle.rank, m.recv.cpu);
        TimeNs& n = nic(m.recv.handle.rank, m.recv.nic);
        const TimeNs t2 = std::max(t, c);
        const TimeNs cts = std::max(t2 + _p.o, n);
        c = cts + _p.o;
        n = cts + _p.g;
        _cpu_busy += 2 * _p.o;
        _nic_busy += _p.g;
        _cal.push(cts + _p.o + _p.L, {Ev::CtsArrive, e.index});
        break;
    }
    case Ev::CtsArrive: {
        Message& m = _msgs[e.index];
        const Bytes b = m.send.bytes;
        const TimeNs bO = _p.O.times(b), bG = _p.G.times(b);
        TimeNs& c = cpu(m.send.handle.rank, m.send.cpu);
        TimeNs& n = nic(m.send.handle.rank, m.send.nic);
        const TimeNs t3 = std::max(t, c);
        const TimeNs ds = std::max(t3 + _p.o, n);
        c = ds + _p.o + bO;
        n = ds + _p.g + bG;
        _cpu_busy += 2 * _p.o + bO;
        _nic_busy += _p.g + bG;
        complete(m.send, ds + _p.o + bO + bG, TaskKind::Send);
        m.arrival = ds + _p.o + bO + _p.L + bG;
        _cal.push(m.arrival, {Ev::DataArrive, e.index});
        break;
    }
    case Ev::DataArrive: {
        Message& m = _msgs[e.index];
        TimeNs& c = cpu(m.recv.handle.rank, m.recv.cpu);
        const TimeNs start = std::max(t, c);
        c = start + _p.o;
        _cpu_busy += _p.o;
        complete(m.recv, c, TaskKind::Recv);
        sim::MessageRecord rec;
        rec.send = m.send.handle;
        rec.recv = m.recv.handle;
        rec.src = m.send.handle.rank;
        rec.dst = m.recv.handle.rank;
        rec.tag = m.send.tag;
        rec.bytes = m.send.bytes;
        rec.send_ready_ns = m.send.t_ready;
        rec.delivered_ns = m.arrival;
        _records.push_back(rec);
        break;
    }
    }
}

void LogGOPSBackend::start_send(TimeNs t, const sim::Post& p) {
    const Rank src = p.handle.rank;
    if (p.peer >= _cpu_free.size())
        throw InvalidArgument("send to rank " + std::to_string(p.peer) + " outside the schedule");
    Message m;
    m.send = p;
    m.rendezvous = !_p.eager(p.bytes);
    TimeNs& c = cpu(src, p.cpu);
    TimeNs& n = nic(src, p.nic);
    const TimeNs ts = std::max({t, c, n});
    if (!m.rendezvous) {
        const TimeNs bO = _p.O.times(p.bytes), bG = _p.G.times(p.bytes);
        c = ts + _p.o + bO;
        n = ts + _p.g + bG;
        _cpu_busy += _p.o + bO;
        _nic_busy += _p.g + bG;
        complete(p, ts + _p.o + bO, TaskKind::Send);
        m.arrival = ts + _p.o + bO + _p.L + bG;
    } else {
        // zero-byte RTS
        c = ts + _p.o;
        n = ts + _p.g;
        _cpu_busy += _p.o;
        _nic_busy += _p.g;
        m.arrival = ts + _p.o + _p.L;
        ++_rendezvous_count;
    }
    const auto idx = static_cast<std::uint32_t>(_msgs.size());
    _msgs.push_back(m);
    if (auto r = _matcher.post_send({src, p.peer, p.tag}, idx)) {
        _msgs[idx].recv = _posts[*r];
        matched(idx, t);
    }
}

void LogGOPSBackend::start_recv(TimeNs t, std::uint32_t post_idx) {
    const sim::Post& p = _posts[post_idx];
    if (auto m = _matcher.post_recv({p.peer, p.handle.rank, p.tag}, post_idx)) {
        _msgs[*m].recv = p;
        matched(*m, t);
    }
}

void LogGOPSBackend::matched(std::uint32_t msg, TimeNs now) {
    const Message& m = _msgs[msg];
    const TimeNs at = std::max(m.arrival, now);
    _cal.push(at, {m.rendezvous ? Ev::RtsArrive : Ev::DataArrive, msg});
}

std::vector<sim::Handle> LogGOPSBackend::unmatched_sends() const {
    std::vector<sim::Handle> out;
    for (std::uint32_t m : _matcher.unmatched_sends())
        out.push_back(_msgs[m].send.handle);
    return out;
}

sim::BackendStats LogGOPSBackend::stats() const {
    sim::BackendStats s;
    s.counters.push_back({"messages", static_cast<double>(_records.size())});
    s.counters.push_back({"rendezvous_messages", static_cast<double>(_rendezvous_count)});
    s.counters.push_back({"cpu_busy_ns", static_cast<double>(_cpu_busy)});
    s.counters.push_back({"nic_busy_ns", static_cast<double>(_nic_busy)});
    return s;
}

} // namespace goalnet::loggops
