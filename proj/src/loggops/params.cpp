#include "goalnet/loggops/params.hpp"

#include <charconv>

namespace goalnet::loggops {

PerByte PerByte::parse(std::string_view text) {
    auto bad = [&](const char* why) {
        return InvalidArgument("per-byte cost '" + std::string(text) + "': " + why);
    };
    if (text.empty())
        throw bad("empty");
    const auto dot = text.find('.');
    std::string_view whole = text.substr(0, dot);
    std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
    if (whole.empty() && frac.empty())
        throw bad("no digits");
    if (frac.size() > 6)
        throw bad("more than six fractional digits");
    std::uint64_t w = 0, f = 0;
    if (!whole.empty()) {
        auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
        if (ec != std::errc{} || p != whole.data() + whole.size())
            throw bad("not a non-negative decimal");
    }
    if (!frac.empty()) {
        auto [p, ec] = std::from_chars(frac.data(), frac.data() + frac.size(), f);
        if (ec != std::errc{} || p != frac.data() + frac.size())
            throw bad("not a non-negative decimal");
        for (std::size_t i = frac.size(); i < 6; ++i)
            f *= 10;
    }
    if (w > std::numeric_limits<std::uint64_t>::max() / 1000000)
        throw bad("too large");
    return femtos(w * 1000000 + f);
}

std::string PerByte::to_string() const {
    std::string s = std::to_string(_fs / 1000000);
    std::uint64_t frac = _fs % 1000000;
    if (frac) {
        std::string f = std::to_string(frac);
        f.insert(0, 6 - f.size(), '0');
        while (f.back() == '0')
            f.pop_back();
        s += "." + f;
    }
    return s;
}

TimeNs PerByte::times(Bytes bytes) const {
    const unsigned __int128 fs = static_cast<unsigned __int128>(bytes) * _fs;
    const unsigned __int128 ns = (fs + 500000) / 1000000;
    if (ns > static_cast<unsigned __int128>(std::numeric_limits<TimeNs>::max()))
        throw InvalidArgument("per-byte cost overflows the time range");
    return static_cast<TimeNs>(ns);
}

Params Params::ai_cluster() {
    Params p;
    p.L = 3700;
    p.o = 200;
    p.g = 5;
    p.G = PerByte::femtos(40000);
    p.O = PerByte{};
    p.S = 0;
    return p;
}

Params Params::hpc_cluster() {
    Params p;
    p.L = 3000;
    p.o = 6000;
    p.g = 0;
    p.G = PerByte::femtos(180000);
    p.O = PerByte{};
    p.S = 256000;
    return p;
}

MessageTiming message_timing(Bytes bytes, const Params& p, Mode mode) {
    MessageTiming m;
    const TimeNs bO = p.O.times(bytes);
    const TimeNs bG = p.G.times(bytes);
    m.sender_cpu = p.o + bO;
    m.sender_nic = p.g + bG;
    m.wire = p.L + bG;
    m.receiver_cpu = p.o;
    if (mode == Mode::Rendezvous)
        m.handshake = 4 * p.o + 2 * p.L;
    m.end_to_end = m.handshake + m.sender_cpu + m.wire + m.receiver_cpu;
    m.sender_done = mode == Mode::Eager ? m.sender_cpu : m.handshake + m.sender_cpu + bG;
    return m;
}

} // namespace goalnet::loggops
