#include "goalnet/cli/report.hpp"

#include <charconv>

#include "json.hpp"

namespace goalnet::cli {

using nlohmann::ordered_json;

namespace {

ordered_json stamp(const RunInfo& info) {
    ordered_json j;
    j["tool"] = "goalnet";
    j["version"] = info.version;
    j["config_hash"] = info.config_hash;
    if (!info.input.empty())
        j["input"] = info.input;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : info.config)
        cfg[k] = v;
    j["config"] = std::move(cfg);
    return j;
}

ordered_json mct_json(const std::optional<sim::MctSummary>& m) {
    if (!m)
        return nullptr;
    ordered_json j;
    j["count"] = m->count;
    j["mean_ns"] = m->mean;
    j["p50_ns"] = m->p50;
    j["p99_ns"] = m->p99;
    j["max_ns"] = m->max;
    return j;
}

template <typename T>
T number(std::string_view s, std::size_t line, const char* what) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line, 0);
    return v;
}

constexpr std::string_view kColumns =
    "send_rank,send_task,recv_rank,recv_task,src,dst,tag,bytes,send_ready_ns,delivered_ns,mct_ns";

} // namespace

std::string header_line(const RunInfo& info) { return "goalnet " + info.version + " config " + info.config_hash; }

std::string report_json(const sim::StatsReport& r, const RunInfo& info) {
    ordered_json j = stamp(info);
    j["backend"] = info.backend;
    j["makespan_ns"] = r.makespan_ns;
    ordered_json jobs = ordered_json::object();
    for (const auto& [id, t] : r.jobs)
        jobs[std::to_string(id)] = t;
    j["jobs"] = std::move(jobs);
    j["messages"] = r.messages.size();
    j["mct"] = mct_json(r.mct);
    ordered_json ranks = ordered_json::array();
    for (std::size_t i = 0; i < r.ranks.size(); ++i)
        ranks.push_back({{"rank", i},
                         {"finish_ns", r.ranks[i].finish_ns},
                         {"busy_ns", r.ranks[i].busy_ns},
                         {"idle_ns", r.ranks[i].idle_ns}});
    j["ranks"] = std::move(ranks);
    ordered_json net;
    net["drops"] = r.backend.drops;
    ordered_json counters = ordered_json::object();
    for (const auto& [k, v] : r.backend.counters)
        counters[k] = v;
    net["counters"] = std::move(counters);
    ordered_json samples = ordered_json::array();
    for (const auto& s : r.backend.queue_samples)
        samples.push_back({{"time_ns", s.time_ns}, {"port", s.port}, {"bytes", s.bytes}});
    net["queue_samples"] = std::move(samples);
    j["net"] = std::move(net);
    return j.dump(2) + "\n";
}

std::string report_csv(const sim::StatsReport& r, const RunInfo& info) {
    std::string out = "# " + header_line(info) + "\n";
    out += kColumns;
    out += '\n';
    for (const auto& m : r.messages) {
        out += std::to_string(m.send.rank) + ',' + std::to_string(m.send.task) + ',' + std::to_string(m.recv.rank) +
               ',' + std::to_string(m.recv.task) + ',' + std::to_string(m.src) + ',' + std::to_string(m.dst) + ',' +
               std::to_string(m.tag) + ',' + std::to_string(m.bytes) + ',' + std::to_string(m.send_ready_ns) + ',' +
               std::to_string(m.delivered_ns) + ',' + std::to_string(m.delivered_ns - m.send_ready_ns) + '\n';
    }
    return out;
}

MessageCsv parse_message_csv(std::string_view text) {
    MessageCsv csv;
    std::size_t line_no = 0;
    bool seen_columns = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        if (line.front() == '#') {
            if (csv.header.empty()) {
                line.remove_prefix(1);
                while (!line.empty() && line.front() == ' ')
                    line.remove_prefix(1);
                csv.header = std::string(line);
            }
            continue;
        }
        if (!seen_columns) {
            if (line != kColumns)
                throw ParseError("unexpected column header", line_no, 1);
            seen_columns = true;
            continue;
        }
        std::vector<std::string_view> f;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            f.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (f.size() != 11)
            throw ParseError("expected 11 fields, got " + std::to_string(f.size()), line_no, 1);
        MessageRow row;
        auto& m = row.msg;
        m.send.rank = number<Rank>(f[0], line_no, "send_rank");
        m.send.task = number<TaskId>(f[1], line_no, "send_task");
        m.recv.rank = number<Rank>(f[2], line_no, "recv_rank");
        m.recv.task = number<TaskId>(f[3], line_no, "recv_task");
        m.src = number<Rank>(f[4], line_no, "src");
        m.dst = number<Rank>(f[5], line_no, "dst");
        m.tag = number<Tag>(f[6], line_no, "tag");
        m.bytes = number<Bytes>(f[7], line_no, "bytes");
        m.send_ready_ns = number<TimeNs>(f[8], line_no, "send_ready_ns");
        m.delivered_ns = number<TimeNs>(f[9], line_no, "delivered_ns");
        row.mct_ns = number<TimeNs>(f[10], line_no, "mct_ns");
        if (row.mct_ns != m.delivered_ns - m.send_ready_ns)
            throw ParseError("mct_ns does not equal delivered_ns - send_ready_ns", line_no, 1);
        csv.rows.push_back(row);
    }
    if (!seen_columns)
        throw ParseError("missing column header");
    return csv;
}

std::string csv_stats_json(const MessageCsv& csv, const RunInfo& info) {
    ordered_json j = stamp(info);
    j["source_header"] = csv.header;
    j["messages"] = csv.rows.size();
    std::vector<TimeNs> samples;
    samples.reserve(csv.rows.size());
    for (const auto& r : csv.rows)
        samples.push_back(r.mct_ns);
    j["mct"] = mct_json(samples.empty() ? std::nullopt : std::optional(sim::summarize_mct(samples)));
    return j.dump(2) + "\n";
}

} // namespace goalnet::cli
