#pragma once

#include <limits>

#include "goalnet/packet/topology.hpp"

namespace goalnet::packet {

enum class CongestionControl { Mprdma, Swift };
enum class Routing { EcmpPerFlow, PacketSpray };

struct SwiftParams {
    double beta = 0.8;
    double beta_max = 0.5;
    TimeNs hop_delay_ns = 1000; // queueing allowance per link on the data path
};

// Window state shared by both algorithms; cwnd is in packets.
struct CcState {
    double cwnd = 1;
    TimePs last_decrease_ps = std::numeric_limits<TimePs>::min();
};

// Per-ack ECN reaction: +1/cwnd unmarked, -1/2 marked, never below 1.
void mprdma_on_ack(CcState& s, bool marked);

// Delay reaction against target_ps. Decreases at most once per rtt.
void swift_on_ack(CcState& s, TimePs rtt_ps, TimePs target_ps, TimePs now_ps, const SwiftParams& p);

} // namespace goalnet::packet
