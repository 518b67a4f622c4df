#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goalnet/common.hpp"
#include "goalnet/goal/schedule.hpp"

namespace goalnet::sim {

// Identity of one task of the schedule being simulated.
struct Handle {
    Rank rank = 0;
    TaskId task = 0;
    auto operator<=>(const Handle&) const = default;
};

// Everything a backend needs to start a task. For Send `peer` is the
// destination, for Recv it is the source. `duration_ns` is only set for Calc.
struct Post {
    Handle handle;
    Rank peer = 0;
    Bytes bytes = 0;
    Tag tag = 0;
    TimeNs duration_ns = 0;
    std::uint16_t cpu = 0;
    std::uint16_t nic = 0;
    TimeNs t_ready = 0;
};

struct Completion {
    Handle handle;
    TimeNs time_ns = 0;
    goal::TaskKind kind = goal::TaskKind::Calc;
};

// One matched message. `delivered_ns` is when the last byte became available
// at the receiver.
struct MessageRecord {
    Handle send;
    Handle recv;
    Rank src = 0;
    Rank dst = 0;
    Tag tag = 0;
    Bytes bytes = 0;
    TimeNs send_ready_ns = 0;
    TimeNs delivered_ns = 0;
};

struct QueueSample {
    TimeNs time_ns = 0;
    std::string port;
    Bytes bytes = 0;
};

struct BackendStats {
    std::uint64_t drops = 0;
    std::vector<QueueSample> queue_samples;
    // extra named counters, in insertion order
    std::vector<std::pair<std::string, double>> counters;
};

// Contract between the engine and a timing model. Posts may arrive in any
// order but never with t_ready earlier than the last completion handed out.
// next_completion() returns completions in non-decreasing time, ties ordered
// by (rank, task); it returns nullopt once nothing is in flight that could
// still complete.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    virtual void setup(const goal::GoalSchedule& schedule) = 0;

    virtual void post_send(const Post& p) = 0;
    virtual void post_recv(const Post& p) = 0;
    virtual void post_calc(const Post& p) = 0;

    virtual std::optional<Completion> next_completion() = 0;

    virtual const std::vector<MessageRecord>& messages() const = 0;
    virtual BackendStats stats() const { return {}; }
    // Sends whose message no recv ever consumed. Eager sends complete without
    // a partner, so the engine asks for these once the DAG has drained.
    virtual std::vector<Handle> unmatched_sends() const = 0;
};

} // namespace goalnet::sim
