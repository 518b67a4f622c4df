#pragma once

#include <string>
#include <string_view>

#include "goalnet/common.hpp"

namespace goalnet::loggops {

// Per-byte cost held as integer femtoseconds per byte so that products with
// large byte counts are exact before the final rounding to ns.
class PerByte {
public:
    constexpr PerByte() = default;
    static constexpr PerByte femtos(std::uint64_t fs) {
        PerByte p;
        p._fs = fs;
        return p;
    }
    // Exact decimal parse of a non-negative ns-per-byte value, at most six
    // fractional digits ("0.04", "1", "0.000125").
    static PerByte parse(std::string_view text);

    constexpr std::uint64_t fs() const { return _fs; }
    double ns() const { return static_cast<double>(_fs) * 1e-6; }
    std::string to_string() const;

    // bytes * cost in ns, rounded half up
    TimeNs times(Bytes bytes) const;

    constexpr auto operator<=>(const PerByte&) const = default;

private:
    std::uint64_t _fs = 0;
};

struct Params {
    TimeNs L = 0;
    TimeNs o = 0;
    TimeNs g = 0;
    PerByte G;
    PerByte O;
    Bytes S = 0; // eager when bytes <= S; kUnlimitedBytes means always eager

    bool eager(Bytes bytes) const { return bytes <= S; }

    // Accelerator cluster: L=3700, o=200, g=5, G=0.04, O=0, S=0.
    static Params ai_cluster();
    // CPU cluster: L=3000, o=6000, g=0, G=0.18, O=0, S=256000.
    static Params hpc_cluster();
};

enum class Mode { Eager, Rendezvous };

// Cost of one message on idle resources with the recv already posted.
struct MessageTiming {
    TimeNs sender_cpu = 0;   // o + bytes*O
    TimeNs sender_nic = 0;   // g + bytes*G
    TimeNs wire = 0;         // L + bytes*G
    TimeNs receiver_cpu = 0; // o
    TimeNs handshake = 0;    // RTS/CTS exchange before the data, rendezvous only
    TimeNs end_to_end = 0;   // send post to recv completion
    TimeNs sender_done = 0;  // send post to send completion
};

MessageTiming message_timing(Bytes bytes, const Params& p, Mode mode);
inline MessageTiming message_timing(Bytes bytes, const Params& p) {
    return message_timing(bytes, p, p.eager(bytes) ? Mode::Eager : Mode::Rendezvous);
}

} // namespace goalnet::loggops
