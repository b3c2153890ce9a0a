#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowlab/distill.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/tensor.hpp"

namespace flowlab {

// On-disk layout (version 1, all integers and doubles little-endian):
//   magic "FLOWCKPT" | u32 version | u32 kind length + kind bytes
//   | u64 meta length + meta bytes (JSON: architecture + counters)
//   | u64 block count | blocks (u32 name length + name, u32 rank, u64 dims,
//     f64 data) | u64 rng length + rng text | u32 CRC32 of everything above.
// A human-readable JSON sidecar is written next to the binary.
struct CheckpointData {
    std::string kind;  // "teacher" or "distill"
    std::string meta;  // JSON text
    std::vector<std::pair<std::string, Tensor>> blocks;
    std::string rng_state;
};

void save_checkpoint_raw(const CheckpointData& data, const std::string& path);
CheckpointData load_checkpoint_raw(const std::string& path);  // IoError on any defect

void save_teacher_checkpoint(const TeacherState& state, const std::string& path);
TeacherState load_teacher_checkpoint(const std::string& path);

void save_distill_checkpoint(const DistillState& state, const std::string& path);
DistillState load_distill_checkpoint(const std::string& path);

// Peeks at the kind field ("teacher" / "distill") without full validation of
// the typed payload.
std::string checkpoint_kind(const std::string& path);

}  // namespace flowlab
