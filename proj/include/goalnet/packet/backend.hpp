#pragma once

#include <deque>
#include <queue>
#include <vector>

#include "goalnet/packet/cc.hpp"
#include "goalnet/packet/topology.hpp"
#include "goalnet/sim/backend.hpp"
#include "goalnet/sim/calendar.hpp"
#include "goalnet/sim/matcher.hpp"

namespace goalnet::packet {

struct PacketNetConfig {
    FatTreeSpec fattree;
    Bytes mtu_bytes = 4096;
    Bytes header_bytes = 64;
    Bytes ack_bytes = 64;
    Bytes queue_capacity_bytes = 1 << 20;
    double ecn_kmin_frac = 0.20;
    double ecn_kmax_frac = 0.80;
    CongestionControl cc = CongestionControl::Mprdma;
    Routing routing = Routing::EcmpPerFlow;
    SwiftParams swift;
    TimeNs rto_ns = 200000;
    TimeNs sample_ns = 10000; // queue sampling period, 0 disables
    std::uint64_t seed = 0;

    void check() const;
};

struct FlowState {
    sim::Handle send;
    Rank src = 0;
    Rank dst = 0;
    Tag tag = 0;
    Bytes bytes = 0;
    std::uint32_t packets = 0;
    CcState cc;
    TimePs base_rtt_ps = 0;
    TimePs target_rtt_ps = 0;
    TimePs start_ps = 0;
    TimePs delivered_ps = -1; // last in-order byte at the receiver
    TimePs acked_ps = -1;     // all packets acknowledged
    std::uint64_t packets_sent = 0;
    std::uint64_t retransmits = 0;
    std::uint64_t acks = 0;
    std::uint64_t marked_acks = 0;
    std::uint64_t timeouts = 0;
    std::vector<TimePs> rtt_samples_ps;
};

struct PortStats {
    std::string name;
    Bytes capacity = 0; // 0 = lossless
    std::uint64_t tx_packets = 0;
    Bytes tx_bytes = 0;
    TimePs busy_ps = 0;
    TimePs first_tx_ps = -1;
    TimePs last_tx_end_ps = -1;
    std::uint64_t drops = 0;
    std::uint64_t marks = 0;
    Bytes max_queue_bytes = 0;
};

// Packet-level fat-tree backend. Rank r runs on host r. Sends start their
// flow as soon as they are posted; the data waits at the receiver until the
// matching recv is posted. A send completes when every packet is
// acknowledged, a recv when the last byte has arrived in order and the recv
// is posted. Calcs behave exactly as in the LogGOPS backend.
class PacketBackend final : public sim::Backend {
public:
    explicit PacketBackend(PacketNetConfig cfg);

    std::string name() const override { return "packet"; }
    void setup(const goal::GoalSchedule& schedule) override;

    void post_send(const sim::Post& p) override;
    void post_recv(const sim::Post& p) override;
    void post_calc(const sim::Post& p) override;

    std::optional<sim::Completion> next_completion() override;

    const std::vector<sim::MessageRecord>& messages() const override { return _records; }
    sim::BackendStats stats() const override;
    std::vector<sim::Handle> unmatched_sends() const override;

    const FatTree& topology() const { return _tree; }
    std::vector<FlowState> flows() const;
    std::vector<PortStats> port_stats() const;

    struct Conservation {
        std::uint64_t injected = 0;
        std::uint64_t delivered = 0;
        std::uint64_t dropped = 0;
        std::uint64_t in_flight = 0;
    };
    Conservation conservation() const;

private:
    enum class Ev : std::uint8_t { Calc, Send, Recv, TxDone, Arrive, Rto };
    struct Event {
        Ev kind;
        std::uint32_t index;
        std::uint32_t node = 0; // Arrive only
    };
    struct Packet {
        std::uint32_t flow = 0;
        std::uint32_t seq = 0;
        std::uint32_t cum = 0; // acks: next in-order packet expected
        std::uint32_t src = 0; // hosts
        std::uint32_t dst = 0;
        std::uint32_t uplink = 0;
        Bytes wire = 0;
        TimePs sent_ps = 0; // echoed by the ack
        bool ack = false;
        bool ecn = false;
    };
    struct Port {
        PortStats st;
        std::uint32_t to = 0;
        std::deque<std::uint32_t> data;
        std::deque<std::uint32_t> acks;
        Bytes queued = 0;
        bool busy = false;
        TimePs next_sample_ps = 0;
    };
    struct Flow {
        FlowState st;
        std::uint32_t next_seq = 0;
        std::uint32_t outstanding = 0;
        std::uint32_t acked_count = 0;
        std::uint32_t cum_acked = 0;
        std::vector<std::uint8_t> sent; // bit 0 ever sent, bit 1 in flight, bit 2 acked
        TimePs last_progress_ps = 0;
        bool timer = false;
        bool send_done = false;
        // receiver side
        std::vector<bool> got;
        std::uint32_t cum_rx = 0;
        std::optional<sim::Post> recv;
        bool recv_done = false;
        std::uint32_t uplink = 0;
    };

    void process(TimePs t, const Event& e);
    void start_flow(TimePs t, std::uint32_t f);
    void try_send(TimePs t, std::uint32_t f);
    void arm_timer(std::uint32_t f);
    void on_rto(TimePs t, std::uint32_t f);
    void on_data(TimePs t, std::uint32_t pkt);
    void on_ack(TimePs t, std::uint32_t pkt);
    void maybe_finish_recv(TimePs t, std::uint32_t f);
    void enqueue(TimePs t, std::uint32_t port, std::uint32_t pkt);
    void start_tx(TimePs t, std::uint32_t port);
    void sample(Port& p, TimePs t);
    std::uint32_t pick_uplink(std::uint32_t src, std::uint32_t dst, std::uint64_t key) const;
    std::uint32_t new_packet(const Packet& p);
    void free_packet(std::uint32_t id);
    void complete(const sim::Handle& h, TimePs t, goal::TaskKind kind);
    TimeNs& cpu(Rank r, std::uint16_t c);

    PacketNetConfig _cfg;
    FatTree _tree;
    Rng _rng;
    std::vector<Port> _ports;
    std::vector<Packet> _pool;
    std::vector<std::uint32_t> _free;
    std::vector<Flow> _flows;
    std::vector<sim::Post> _posts;
    sim::Matcher<std::uint32_t, std::uint32_t> _matcher; // flow index, recv post index
    sim::Calendar<Event, TimePs> _cal;
    std::priority_queue<sim::Completion, std::vector<sim::Completion>, sim::CompletionOrder> _done;
    std::vector<std::vector<TimeNs>> _cpu_free;
    std::vector<sim::MessageRecord> _records;
    std::vector<sim::QueueSample> _samples;
    std::uint64_t _serial = 0;
    Conservation _cons;
    std::uint64_t _data_packets = 0, _ack_packets = 0, _retransmits = 0, _timeouts = 0, _marks = 0;
};

} // namespace goalnet::packet
