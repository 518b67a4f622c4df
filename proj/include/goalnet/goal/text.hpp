#pragma once

#include <string>
#include <string_view>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::goal {

// Parses the line-oriented GOAL text form:
//
//   num_ranks 2
//   rank 0 {
//     l1: calc 100
//     l2: send 8b to 1 tag 3
//     l3: recv 8b from 1 cpu 1
//     l2 requires l1
//   }
//
// `rank <r> job <j> {` optionally tags a rank with a job id. Throws ParseError
// with line/column on syntax errors, unknown labels, duplicate labels,
// out-of-range peers and dependency cycles.
GoalSchedule parse_text(std::string_view text);

// Deterministic rendering: tasks in id order, deps sorted. Tasks without a
// usable label get a generated `t<id>` one. `header` lines are emitted as
// comments before the body.
std::string emit_text(const GoalSchedule& s, std::string_view header = {});

bool is_valid_label(std::string_view label);

} // namespace goalnet::goal
