#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "goalnet/sim/stats.hpp"

namespace goalnet::cli {

// Reproducibility stamp written into every artifact.
struct RunInfo {
    std::string version;
    std::string config_hash;
    std::map<std::string, std::string> config; // resolved
    std::string input;                         // input file name, may be empty
    std::string backend;                       // simulate only
};

std::string header_line(const RunInfo& info); // "goalnet <version> config <hash>"

// StatsReport as pretty JSON (two-space indent, trailing newline).
std::string report_json(const sim::StatsReport& r, const RunInfo& info);

// One row per message behind a '#' header line.
std::string report_csv(const sim::StatsReport& r, const RunInfo& info);

struct MessageRow {
    sim::MessageRecord msg;
    TimeNs mct_ns = 0;
};

struct MessageCsv {
    std::string header; // text of the leading '#' line, without '#'
    std::vector<MessageRow> rows;
};

// Parses what report_csv writes. Rows whose mct_ns disagrees with
// delivered_ns - send_ready_ns are rejected.
MessageCsv parse_message_csv(std::string_view text);

// Percentile summary of a message CSV as JSON.
std::string csv_stats_json(const MessageCsv& csv, const RunInfo& info);

} // namespace goalnet::cli
