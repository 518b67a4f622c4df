#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "goalnet/common.hpp"

namespace goalnet::goal {

enum class TaskKind : std::uint8_t { Send = 0, Recv = 1, Calc = 2 };

std::string_view to_string(TaskKind kind);

// One vertex of a rank's DAG. Fields that do not apply to the kind are kept at
// zero: Calc carries only duration_ns, Send/Recv carry bytes, peer and tag.
struct Task {
    TaskKind kind = TaskKind::Calc;
    Bytes bytes = 0;
    Rank peer = 0;
    Tag tag = 0;
    TimeNs duration_ns = 0;
    std::uint16_t cpu = 0;
    std::uint16_t nic = 0;
    std::string label;

    static Task calc(TimeNs duration, std::uint16_t cpu = 0);
    static Task send(Bytes bytes, Rank to, Tag tag = 0, std::uint16_t cpu = 0, std::uint16_t nic = 0);
    static Task recv(Bytes bytes, Rank from, Tag tag = 0, std::uint16_t cpu = 0, std::uint16_t nic = 0);

    bool is_comm() const { return kind != TaskKind::Calc; }
    // Zero-cost calc used to fan out / join concurrent sub-DAGs.
    bool is_dummy() const { return kind == TaskKind::Calc && duration_ns == 0; }

    // Equal in every field except the label.
    bool same_shape(const Task& other) const;
    bool operator==(const Task&) const = default;
};

// Edge `before` -> `after`: `after` may start only once `before` completed.
struct Dep {
    TaskId before = 0;
    TaskId after = 0;
    auto operator<=>(const Dep&) const = default;
};

struct RankSchedule {
    Rank rank = 0;
    std::vector<Task> tasks;
    std::vector<Dep> deps;
    std::uint32_t job_id = 0;

    TaskId add(Task t) {
        tasks.push_back(std::move(t));
        return static_cast<TaskId>(tasks.size() - 1);
    }
    void require(TaskId after, TaskId before) { deps.push_back({before, after}); }

    // Sorts deps and removes duplicates.
    void canonicalize();

    // Deps are compared as sets.
    bool operator==(const RankSchedule& other) const;
    bool same_shape(const RankSchedule& other) const;
};

struct GoalSchedule {
    std::vector<RankSchedule> ranks;

    GoalSchedule() = default;
    explicit GoalSchedule(std::size_t num_ranks);

    std::size_t num_ranks() const { return ranks.size(); }
    RankSchedule& operator[](Rank r) { return ranks.at(r); }
    const RankSchedule& operator[](Rank r) const { return ranks.at(r); }

    std::size_t task_count() const;
    std::size_t dep_count() const;
    void canonicalize();

    bool operator==(const GoalSchedule& other) const = default;
    // Structural equality ignoring task labels (the binary form carries none).
    bool same_shape(const GoalSchedule& other) const;
};

// Adjacency helpers over one rank's DAG.
struct RankGraph {
    std::vector<std::vector<TaskId>> succ;
    std::vector<std::vector<TaskId>> pred;

    explicit RankGraph(const RankSchedule& rs);
    std::vector<TaskId> roots() const;
    std::vector<TaskId> sinks() const;
};

} // namespace goalnet::goal
