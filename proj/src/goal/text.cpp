#include "goalnet/goal/text.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "goalnet/goal/validate.hpp"

namespace goalnet::goal {

namespace {

enum class Tok { Word, Colon, LBrace, RBrace, End };

struct Token {
    Tok type;
    std::string_view text;
    std::size_t line;
    std::size_t col;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : _src(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (_pos >= _src.size()) {
                out.push_back({Tok::End, {}, _line, _col});
                return out;
            }
            char c = _src[_pos];
            std::size_t line = _line, col = _col;
            if (c == ':' || c == '{' || c == '}') {
                Tok t = c == ':' ? Tok::Colon : (c == '{' ? Tok::LBrace : Tok::RBrace);
                out.push_back({t, _src.substr(_pos, 1), line, col});
                advance();
                continue;
            }
            std::size_t start = _pos;
            while (_pos < _src.size() && !is_break(_src[_pos]))
                advance();
            out.push_back({Tok::Word, _src.substr(start, _pos - start), line, col});
        }
    }

private:
    static bool is_break(char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ':' || c == '{' || c == '}' || c == '#';
    }
    void advance() {
        if (_src[_pos] == '\n') {
            ++_line;
            _col = 1;
        } else {
            ++_col;
        }
        ++_pos;
    }
    void skip_space() {
        while (_pos < _src.size()) {
            char c = _src[_pos];
            if (c == '#') {
                while (_pos < _src.size() && _src[_pos] != '\n')
                    advance();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    std::string_view _src;
    std::size_t _pos = 0;
    std::size_t _line = 1;
    std::size_t _col = 1;
};

std::optional<std::uint64_t> to_uint(std::string_view s) {
    if (s.empty())
        return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

struct PendingDep {
    std::string_view after;
    std::string_view before;
    std::size_t line;
    std::size_t col;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : _toks(std::move(toks)) {}

    GoalSchedule run() {
        expect_keyword("num_ranks");
        auto n = expect_uint("rank count");
        if (n < 1 || n > std::numeric_limits<Rank>::max())
            fail(prev(), "num_ranks must be >= 1");
        GoalSchedule s(static_cast<std::size_t>(n));
        std::vector<bool> seen(s.num_ranks(), false);
        while (peek().type != Tok::End) {
            expect_keyword("rank");
            const Token& rank_tok = peek();
            auto r = expect_uint("rank id");
            if (r >= s.num_ranks())
                fail(rank_tok, "rank " + std::to_string(r) + " outside num_ranks " + std::to_string(s.num_ranks()));
            if (seen[r])
                fail(rank_tok, "duplicate block for rank " + std::to_string(r));
            seen[r] = true;
            RankSchedule& rs = s.ranks[r];
            if (is_word("job")) {
                ++_i;
                rs.job_id = static_cast<std::uint32_t>(expect_uint("job id", std::numeric_limits<std::uint32_t>::max()));
            }
            expect(Tok::LBrace, "'{'");
            parse_block(rs, s.num_ranks());
            expect(Tok::RBrace, "'}'");
        }
        return s;
    }

private:
    [[noreturn]] void fail(const Token& t, const std::string& msg) { throw ParseError(msg, t.line, t.col); }

    const Token& peek(std::size_t k = 0) const { return _toks[std::min(_i + k, _toks.size() - 1)]; }
    const Token& prev() const { return _toks[_i - 1]; }
    bool is_word(std::string_view w, std::size_t k = 0) const {
        return peek(k).type == Tok::Word && peek(k).text == w;
    }

    void expect(Tok type, const char* what) {
        if (peek().type != type)
            fail(peek(), std::string("expected ") + what + describe(peek()));
        ++_i;
    }
    void expect_keyword(std::string_view kw) {
        if (!is_word(kw))
            fail(peek(), "expected '" + std::string(kw) + "'" + describe(peek()));
        ++_i;
    }
    std::uint64_t expect_uint(const char* what, std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
        const Token& t = peek();
        auto v = t.type == Tok::Word ? to_uint(t.text) : std::nullopt;
        if (!v)
            fail(t, std::string("expected ") + what + describe(t));
        if (*v > max)
            fail(t, std::string(what) + " out of range");
        ++_i;
        return *v;
    }
    std::uint64_t expect_bytes() {
        const Token& t = peek();
        std::string_view text = t.text;
        if (t.type == Tok::Word && !text.empty() && (text.back() == 'b' || text.back() == 'B'))
            text.remove_suffix(1);
        auto v = t.type == Tok::Word ? to_uint(text) : std::nullopt;
        if (!v)
            fail(t, "expected byte count like '8b'" + describe(t));
        ++_i;
        return *v;
    }
    static std::string describe(const Token& t) {
        if (t.type == Tok::End)
            return ", found end of input";
        return ", found '" + std::string(t.text) + "'";
    }

    static bool is_uint_word(const Token& t) { return t.type == Tok::Word && to_uint(t.text).has_value(); }

    void parse_block(RankSchedule& rs, std::size_t num_ranks) {
        std::unordered_map<std::string_view, TaskId> labels;
        std::vector<PendingDep> pending;
        while (peek().type == Tok::Word) {
            const Token& label = peek();
            if (!is_valid_label(label.text))
                fail(label, "invalid label '" + std::string(label.text) + "'");
            if (peek(1).type == Tok::Colon) {
                _i += 2;
                Task t = parse_task(num_ranks);
                t.label = std::string(label.text);
                if (!labels.emplace(label.text, static_cast<TaskId>(rs.tasks.size())).second)
                    fail(label, "duplicate label '" + std::string(label.text) + "'");
                rs.tasks.push_back(std::move(t));
            } else if (is_word("requires", 1)) {
                _i += 2;
                const Token& before = peek();
                if (before.type != Tok::Word || !is_valid_label(before.text))
                    fail(before, "expected label after 'requires'" + describe(before));
                ++_i;
                pending.push_back({label.text, before.text, before.line, before.col});
            } else {
                fail(peek(1), "expected ':' or 'requires' after label" + describe(peek(1)));
            }
        }
        for (const auto& p : pending) {
            auto a = labels.find(p.after);
            if (a == labels.end())
                throw ParseError("unknown label '" + std::string(p.after) + "'", p.line, p.col);
            auto b = labels.find(p.before);
            if (b == labels.end())
                throw ParseError("unknown label '" + std::string(p.before) + "'", p.line, p.col);
            rs.deps.push_back({b->second, a->second});
        }
        rs.canonicalize();
        if (auto cyc = find_cycle(rs)) {
            std::string path;
            for (TaskId id : *cyc)
                path += (path.empty() ? "" : " -> ") + rs.tasks[id].label;
            const Token& at = prev();
            throw ParseError("dependency cycle in rank " + std::to_string(rs.rank) + ": " + path, at.line, at.col);
        }
    }

    Task parse_task(std::size_t num_ranks) {
        const Token& kw = peek();
        if (is_word("calc")) {
            ++_i;
            auto ns = expect_uint("duration in ns", static_cast<std::uint64_t>(std::numeric_limits<TimeNs>::max()));
            Task t = Task::calc(static_cast<TimeNs>(ns));
            parse_suffixes(t, false);
            return t;
        }
        bool is_send = is_word("send");
        if (!is_send && !is_word("recv"))
            fail(kw, "expected 'calc', 'send' or 'recv'" + describe(kw));
        ++_i;
        auto bytes = expect_bytes();
        expect_keyword(is_send ? "to" : "from");
        const Token& peer_tok = peek();
        auto peer = expect_uint("peer rank");
        if (peer >= num_ranks)
            fail(peer_tok, "peer rank " + std::to_string(peer) + " out of range [0, " + std::to_string(num_ranks) + ")");
        Task t = is_send ? Task::send(bytes, static_cast<Rank>(peer)) : Task::recv(bytes, static_cast<Rank>(peer));
        parse_suffixes(t, true);
        return t;
    }

    void parse_suffixes(Task& t, bool comm) {
        bool has_tag = false, has_cpu = false, has_nic = false;
        while (peek().type == Tok::Word && is_uint_word(peek(1))) {
            std::string_view w = peek().text;
            const Token& kw = peek();
            if (w == "cpu") {
                if (has_cpu)
                    fail(kw, "repeated 'cpu'");
                ++_i;
                t.cpu = static_cast<std::uint16_t>(expect_uint("cpu stream", 0xffff));
                has_cpu = true;
            } else if (comm && w == "tag") {
                if (has_tag)
                    fail(kw, "repeated 'tag'");
                ++_i;
                t.tag = static_cast<Tag>(expect_uint("tag", std::numeric_limits<Tag>::max()));
                has_tag = true;
            } else if (comm && w == "nic") {
                if (has_nic)
                    fail(kw, "repeated 'nic'");
                ++_i;
                t.nic = static_cast<std::uint16_t>(expect_uint("nic", 0xffff));
                has_nic = true;
            } else {
                fail(kw, "unexpected '" + std::string(w) + "'");
            }
        }
    }

    std::vector<Token> _toks;
    std::size_t _i = 0;
};

} // namespace

bool is_valid_label(std::string_view label) {
    if (label.empty())
        return false;
    char c0 = label[0];
    if (!((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z') || c0 == '_'))
        return false;
    for (char c : label) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                  c == '.' || c == '-';
        if (!ok)
            return false;
    }
    return true;
}

GoalSchedule parse_text(std::string_view text) {
    return Parser(Lexer(text).run()).run();
}

namespace {

std::vector<std::string> printable_labels(const RankSchedule& rs) {
    std::vector<std::string> out(rs.tasks.size());
    std::unordered_set<std::string> used;
    for (std::size_t i = 0; i < rs.tasks.size(); ++i) {
        const auto& l = rs.tasks[i].label;
        if (is_valid_label(l) && used.insert(l).second)
            out[i] = l;
    }
    for (std::size_t i = 0; i < rs.tasks.size(); ++i) {
        if (!out[i].empty())
            continue;
        std::string candidate = "t" + std::to_string(i);
        while (!used.insert(candidate).second)
            candidate += "_";
        out[i] = std::move(candidate);
    }
    return out;
}

} // namespace

std::string emit_text(const GoalSchedule& s, std::string_view header) {
    std::ostringstream os;
    if (!header.empty()) {
        std::istringstream hs{std::string(header)};
        std::string line;
        while (std::getline(hs, line))
            os << "# " << line << '\n';
    }
    os << "num_ranks " << s.num_ranks() << '\n';
    for (const auto& rs : s.ranks) {
        os << "rank " << rs.rank;
        if (rs.job_id != 0)
            os << " job " << rs.job_id;
        os << " {\n";
        auto labels = printable_labels(rs);
        for (std::size_t i = 0; i < rs.tasks.size(); ++i) {
            const Task& t = rs.tasks[i];
            os << "  " << labels[i] << ": ";
            switch (t.kind) {
            case TaskKind::Calc:
                os << "calc " << t.duration_ns;
                break;
            case TaskKind::Send:
                os << "send " << t.bytes << "b to " << t.peer;
                break;
            case TaskKind::Recv:
                os << "recv " << t.bytes << "b from " << t.peer;
                break;
            }
            if (t.is_comm() && t.tag != 0)
                os << " tag " << t.tag;
            if (t.cpu != 0)
                os << " cpu " << t.cpu;
            if (t.is_comm() && t.nic != 0)
                os << " nic " << t.nic;
            os << '\n';
        }
        auto deps = rs.deps;
        std::sort(deps.begin(), deps.end());
        deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
        for (const auto& d : deps)
            os << "  " << labels[d.after] << " requires " << labels[d.before] << '\n';
        os << "}\n";
    }
    return os.str();
}

} // namespace goalnet::goal
