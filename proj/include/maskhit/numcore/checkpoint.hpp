// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "maskhit/numcore/graph.hpp"

namespace maskhit {

// Checkpoint layout (all integers little-endian):
//   "MHCK" | u32 version | section(params) | section(optimizer)
//   section := u32 entry count, then per entry:
//     u32 name length | UTF-8 name | u32 rank | rank x u64 extents | f32 values
// Values are stored as f32, so loading a checkpoint rounds parameters to float.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ParamMap params;
    ParamMap optimizer;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace maskhit
