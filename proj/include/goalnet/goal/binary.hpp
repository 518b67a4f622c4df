#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "goalnet/goal/schedule.hpp"

namespace goalnet::goal {

// Every stream starts with "GOAL" | version u32 | num_ranks u32 (little-endian).
//
// Fixed layout (versions 1 and 2):
//   per rank: rank u32 | task count u32 | tasks | edge count u32 | edges
//   task: kind u8 | cpu u16 | nic u16 | peer u32 | tag u32 | bytes_or_duration u64
//   edge: before u32 | after u32
//   Version 2 appends one job id u32 per rank (in rank-table order).
//
// Packed layout (version 3), all integers LEB128:
//   per rank: rank | job id | task count | tasks | edge count | edges
//   task: head u8 (kind in bits 0-1, bit 2 cpu, bit 3 nic, bit 4 tag present)
//         | [cpu] | [nic] | [tag] | [peer, comm only] | bytes_or_duration
//   edge: before | after
//
// Labels are not stored in any layout.
inline constexpr std::uint32_t kBinaryVersion = 1;
inline constexpr std::uint32_t kBinaryVersionWithJobs = 2;
inline constexpr std::uint32_t kBinaryVersionPacked = 3;
inline constexpr std::size_t kBinaryTaskSize = 1 + 2 + 2 + 4 + 4 + 8;

enum class BinaryLayout { Packed, Fixed };

// Fixed emits version 1, or 2 when some rank carries a non-zero job id.
std::vector<std::uint8_t> encode_binary(const GoalSchedule& s, BinaryLayout layout = BinaryLayout::Packed);

// Accepts every version above. Throws FormatError on bad magic, unsupported
// version, truncation (naming the rank being read), dangling dependency
// indices or trailing bytes.
GoalSchedule decode_binary(std::span<const std::uint8_t> bytes);

bool looks_binary(std::span<const std::uint8_t> bytes);

} // namespace goalnet::goal
