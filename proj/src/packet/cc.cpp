#include "goalnet/packet/cc.hpp"

#include <algorithm>

namespace goalnet::packet {

void mprdma_on_ack(CcState& s, bool marked) {
    if (marked)
        s.cwnd -= 0.5;
    else
        s.cwnd += 1.0 / s.cwnd;
    s.cwnd = std::max(1.0, s.cwnd);
}

void swift_on_ack(CcState& s, TimePs rtt_ps, TimePs target_ps, TimePs now_ps, const SwiftParams& p) {
    if (rtt_ps <= target_ps) {
        s.cwnd += 1.0 / s.cwnd;
    } else if (s.last_decrease_ps == std::numeric_limits<TimePs>::min() || now_ps - s.last_decrease_ps >= rtt_ps) {
        const double over = static_cast<double>(rtt_ps - target_ps) / static_cast<double>(rtt_ps);
        s.cwnd *= std::max(1.0 - p.beta * over, 1.0 - p.beta_max);
        s.last_decrease_ps = now_ps;
    }
    s.cwnd = std::max(1.0, s.cwnd);
}

} // namespace goalnet::packet
