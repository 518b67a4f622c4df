#include "goalnet/goal/binary.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_set>

namespace goalnet::goal {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'O', 'A', 'L'};

class Writer {
public:
    void u8(std::uint8_t v) { _out.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void var(std::uint64_t v) {
        while (v >= 0x80) {
            _out.push_back(static_cast<std::uint8_t>(v | 0x80));
            v >>= 7;
        }
        _out.push_back(static_cast<std::uint8_t>(v));
    }
    void raw(const std::uint8_t* p, std::size_t n) { _out.insert(_out.end(), p, p + n); }
    void reserve(std::size_t n) { _out.reserve(n); }
    std::vector<std::uint8_t> take() { return std::move(_out); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i)
            _out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> _out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : _in(in) {}

    void set_context(std::string ctx) { _ctx = std::move(ctx); }
    std::size_t remaining() const { return _in.size() - _pos; }

    void need(std::size_t n) const {
        if (remaining() < n)
            throw FormatError("truncated stream while reading " + _ctx + " at offset " + std::to_string(_pos));
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::uint64_t var() {
        std::uint64_t v = 0;
        for (int shift = 0;; shift += 7) {
            need(1);
            const std::uint8_t b = _in[_pos++];
            if (shift == 63 && b > 1)
                throw FormatError("varint overflow while reading " + _ctx + " at offset " + std::to_string(_pos - 1));
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if (!(b & 0x80))
                return v;
        }
    }
    std::uint32_t var32() {
        const std::uint64_t v = var();
        if (v > std::numeric_limits<std::uint32_t>::max())
            throw FormatError("value out of range while reading " + _ctx);
        return static_cast<std::uint32_t>(v);
    }
    std::uint16_t var16() {
        const std::uint64_t v = var();
        if (v > std::numeric_limits<std::uint16_t>::max())
            throw FormatError("value out of range while reading " + _ctx);
        return static_cast<std::uint16_t>(v);
    }

private:
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(_in[_pos + i]) << (8 * i);
        _pos += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> _in;
    std::size_t _pos = 0;
    std::string _ctx = "header";
};

} // namespace

namespace {

constexpr std::uint8_t kHeadCpu = 1 << 2;
constexpr std::uint8_t kHeadNic = 1 << 3;
constexpr std::uint8_t kHeadTag = 1 << 4;

void check_encodable(const GoalSchedule& s) {
    if (s.num_ranks() > std::numeric_limits<std::uint32_t>::max())
        throw InvalidArgument("too many ranks for the binary format");
    for (const auto& rs : s.ranks) {
        if (rs.tasks.size() > std::numeric_limits<std::uint32_t>::max())
            throw InvalidArgument("rank " + std::to_string(rs.rank) + " exceeds 2^32 tasks");
        if (rs.deps.size() > std::numeric_limits<std::uint32_t>::max())
            throw InvalidArgument("rank " + std::to_string(rs.rank) + " exceeds 2^32 dependencies");
    }
}

std::uint64_t payload(const Task& t) {
    return t.kind == TaskKind::Calc ? static_cast<std::uint64_t>(t.duration_ns) : t.bytes;
}

void encode_fixed(Writer& w, const GoalSchedule& s) {
    const bool with_jobs =
        std::any_of(s.ranks.begin(), s.ranks.end(), [](const RankSchedule& r) { return r.job_id != 0; });
    w.reserve(12 + s.num_ranks() * 12 + s.task_count() * kBinaryTaskSize + s.dep_count() * 8);
    w.u32(with_jobs ? kBinaryVersionWithJobs : kBinaryVersion);
    w.u32(static_cast<std::uint32_t>(s.num_ranks()));
    for (const auto& rs : s.ranks) {
        w.u32(rs.rank);
        w.u32(static_cast<std::uint32_t>(rs.tasks.size()));
        for (const auto& t : rs.tasks) {
            w.u8(static_cast<std::uint8_t>(t.kind));
            w.u16(t.cpu);
            w.u16(t.nic);
            w.u32(t.peer);
            w.u32(t.tag);
            w.u64(payload(t));
        }
        w.u32(static_cast<std::uint32_t>(rs.deps.size()));
        for (const auto& d : rs.deps) {
            w.u32(d.before);
            w.u32(d.after);
        }
    }
    if (with_jobs)
        for (const auto& rs : s.ranks)
            w.u32(rs.job_id);
}

void encode_packed(Writer& w, const GoalSchedule& s) {
    w.reserve(12 + s.num_ranks() * 4 + s.task_count() * 6 + s.dep_count() * 4);
    w.u32(kBinaryVersionPacked);
    w.u32(static_cast<std::uint32_t>(s.num_ranks()));
    for (const auto& rs : s.ranks) {
        w.var(rs.rank);
        w.var(rs.job_id);
        w.var(rs.tasks.size());
        for (const auto& t : rs.tasks) {
            std::uint8_t head = static_cast<std::uint8_t>(t.kind);
            if (t.cpu)
                head |= kHeadCpu;
            if (t.nic)
                head |= kHeadNic;
            if (t.tag)
                head |= kHeadTag;
            w.u8(head);
            if (t.cpu)
                w.var(t.cpu);
            if (t.nic)
                w.var(t.nic);
            if (t.tag)
                w.var(t.tag);
            if (t.is_comm())
                w.var(t.peer);
            w.var(payload(t));
        }
        w.var(rs.deps.size());
        for (const auto& d : rs.deps) {
            w.var(d.before);
            w.var(d.after);
        }
    }
}

void set_payload(Task& t, std::uint64_t v, Rank rank) {
    if (t.kind == TaskKind::Calc) {
        if (v > static_cast<std::uint64_t>(std::numeric_limits<TimeNs>::max()))
            throw FormatError("rank " + std::to_string(rank) + ": calc duration overflows");
        t.duration_ns = static_cast<TimeNs>(v);
    } else {
        t.bytes = v;
    }
}

TaskKind to_kind(std::uint8_t kind, Rank rank) {
    if (kind > static_cast<std::uint8_t>(TaskKind::Calc))
        throw FormatError("rank " + std::to_string(rank) + ": unknown task kind " + std::to_string(kind));
    return static_cast<TaskKind>(kind);
}

void check_deps(const RankSchedule& rs) {
    for (const auto& d : rs.deps)
        if (d.before >= rs.tasks.size() || d.after >= rs.tasks.size())
            throw FormatError("rank " + std::to_string(rs.rank) + ": dangling dependency index " +
                              std::to_string(std::max(d.before, d.after)) + " (" + std::to_string(rs.tasks.size()) +
                              " tasks)");
}

Rank read_rank_id(Reader& r, std::uint32_t index, std::uint32_t num_ranks, std::unordered_set<Rank>& seen,
                  bool packed) {
    r.set_context("rank table #" + std::to_string(index));
    const Rank rank = packed ? r.var32() : r.u32();
    if (rank >= num_ranks || !seen.insert(rank).second)
        throw FormatError("invalid or duplicate rank id " + std::to_string(rank) + " in rank table #" +
                          std::to_string(index));
    return rank;
}

RankSchedule decode_fixed_rank(Reader& r, Rank rank) {
    RankSchedule rs;
    rs.rank = rank;
    const std::string name = "rank " + std::to_string(rank);
    r.set_context(name + " header");
    const std::uint32_t ntasks = r.u32();
    r.set_context(name + " tasks");
    r.need(static_cast<std::size_t>(ntasks) * kBinaryTaskSize);
    rs.tasks.resize(ntasks);
    for (auto& t : rs.tasks) {
        t.kind = to_kind(r.u8(), rank);
        t.cpu = r.u16();
        t.nic = r.u16();
        t.peer = r.u32();
        t.tag = r.u32();
        set_payload(t, r.u64(), rank);
    }
    r.set_context(name + " edge count");
    const std::uint32_t nedges = r.u32();
    r.set_context(name + " edges");
    r.need(static_cast<std::size_t>(nedges) * 8);
    rs.deps.resize(nedges);
    for (auto& d : rs.deps) {
        d.before = r.u32();
        d.after = r.u32();
    }
    return rs;
}

RankSchedule decode_packed_rank(Reader& r, Rank rank) {
    RankSchedule rs;
    rs.rank = rank;
    const std::string name = "rank " + std::to_string(rank);
    r.set_context(name + " header");
    rs.job_id = r.var32();
    const std::uint32_t ntasks = r.var32();
    r.set_context(name + " tasks");
    r.need(static_cast<std::size_t>(ntasks) * 2); // head + payload at minimum
    rs.tasks.resize(ntasks);
    for (auto& t : rs.tasks) {
        const std::uint8_t head = r.u8();
        if (head & ~0x1f)
            throw FormatError(name + ": bad task header byte " + std::to_string(head));
        t.kind = to_kind(head & 3, rank);
        if (head & kHeadCpu)
            t.cpu = r.var16();
        if (head & kHeadNic)
            t.nic = r.var16();
        if (head & kHeadTag)
            t.tag = r.var32();
        if (t.is_comm())
            t.peer = r.var32();
        set_payload(t, r.var(), rank);
    }
    r.set_context(name + " edge count");
    const std::uint32_t nedges = r.var32();
    r.set_context(name + " edges");
    r.need(static_cast<std::size_t>(nedges) * 2);
    rs.deps.resize(nedges);
    for (auto& d : rs.deps) {
        d.before = r.var32();
        d.after = r.var32();
    }
    return rs;
}

} // namespace

std::vector<std::uint8_t> encode_binary(const GoalSchedule& s, BinaryLayout layout) {
    check_encodable(s);
    Writer w;
    w.raw(kMagic, 4);
    if (layout == BinaryLayout::Fixed)
        encode_fixed(w, s);
    else
        encode_packed(w, s);
    return w.take();
}

bool looks_binary(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0;
}

GoalSchedule decode_binary(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4);
    if (!looks_binary(bytes))
        throw FormatError("bad magic: not a binary GOAL stream");
    r.u32(); // magic, already checked
    const std::uint32_t version = r.u32();
    if (version != kBinaryVersion && version != kBinaryVersionWithJobs && version != kBinaryVersionPacked)
        throw FormatError("unsupported binary GOAL version " + std::to_string(version));
    const bool packed = version == kBinaryVersionPacked;
    const std::uint32_t num_ranks = r.u32();
    if (num_ranks == 0)
        throw FormatError("binary GOAL stream declares zero ranks");
    // Tables are read before the schedule is allocated so that a corrupt rank
    // count cannot trigger a huge allocation.
    std::vector<RankSchedule> tables;
    std::unordered_set<Rank> seen;
    for (std::uint32_t i = 0; i < num_ranks; ++i) {
        const Rank rank = read_rank_id(r, i, num_ranks, seen, packed);
        RankSchedule rs = packed ? decode_packed_rank(r, rank) : decode_fixed_rank(r, rank);
        check_deps(rs);
        rs.canonicalize();
        tables.push_back(std::move(rs));
    }
    if (version == kBinaryVersionWithJobs) {
        r.set_context("job table");
        for (auto& rs : tables)
            rs.job_id = r.u32();
    }
    if (r.remaining() != 0)
        throw FormatError("trailing bytes after the last rank table");
    GoalSchedule s;
    s.ranks.resize(num_ranks);
    for (auto& rs : tables) {
        Rank rank = rs.rank;
        s.ranks[rank] = std::move(rs);
    }
    return s;
}

} // namespace goalnet::goal
