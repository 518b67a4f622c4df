#pragma once

#include <queue>
#include <vector>

#include "goalnet/loggops/params.hpp"
#include "goalnet/sim/backend.hpp"
#include "goalnet/sim/calendar.hpp"
#include "goalnet/sim/matcher.hpp"

namespace goalnet::loggops {

// Message-level timing model. Each (rank, cpu) stream and each (rank, nic)
// is a resource that serves requests in event order. Sends pay o + bytes*O on
// their stream, then g + bytes*G on their NIC, then L on the wire; the
// matching recv pays o on its stream once the data has arrived. Messages above
// S go through a zero-byte RTS/CTS exchange before the data is sent.
class LogGOPSBackend final : public sim::Backend {
public:
    explicit LogGOPSBackend(Params p) : _p(p) {}

    std::string name() const override { return "loggops"; }
    void setup(const goal::GoalSchedule& schedule) override;

    void post_send(const sim::Post& p) override;
    void post_recv(const sim::Post& p) override;
    void post_calc(const sim::Post& p) override;

    std::optional<sim::Completion> next_completion() override;

    const std::vector<sim::MessageRecord>& messages() const override { return _records; }
    sim::BackendStats stats() const override;
    std::vector<sim::Handle> unmatched_sends() const override;

    const Params& params() const { return _p; }

private:
    enum class Ev : std::uint8_t { Calc, Send, Recv, RtsArrive, CtsArrive, DataArrive };
    struct Event {
        Ev kind;
        std::uint32_t index; // into _posts for Calc/Send/Recv, into _msgs otherwise
    };
    struct Message {
        sim::Post send;
        sim::Post recv;
        bool rendezvous = false;
        TimeNs arrival = 0; // data arrival (eager) or RTS arrival (rendezvous)
    };

    void process(TimeNs t, const Event& e);
    void start_send(TimeNs t, const sim::Post& p);
    void start_recv(TimeNs t, std::uint32_t post_idx);
    void matched(std::uint32_t msg, TimeNs now);
    TimeNs& cpu(Rank r, std::uint16_t c);
    TimeNs& nic(Rank r, std::uint16_t n);
    void complete(const sim::Post& p, TimeNs t, goal::TaskKind kind);

    Params _p;
    std::vector<sim::Post> _posts;
    std::vector<Message> _msgs;
    sim::Matcher<std::uint32_t, std::uint32_t> _matcher; // message index, recv post index
    sim::Calendar<Event> _cal;
    std::priority_queue<sim::Completion, std::vector<sim::Completion>, sim::CompletionOrder> _done;
    std::vector<std::vector<TimeNs>> _cpu_free;
    std::vector<std::vector<TimeNs>> _nic_free;
    std::vector<sim::MessageRecord> _records;
    std::uint64_t _rendezvous_count = 0;
    TimeNs _cpu_busy = 0;
    TimeNs _nic_busy = 0;
};

} // namespace goalnet::loggops
