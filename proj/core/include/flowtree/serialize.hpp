// Copyright 2026 The Flowtree Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Bit-exact little-endian tree encoding.
//
//   header (56 bytes)
//     magic "FTR1" | version u16 | feature set u8 | reserved u8
//     insert probability in millionths u32 | max_nodes u32 | seed u64
//     node count u32 | total flows, packets, bytes 3 x u64 | CRC-32 of body u32
//   body: node count records sorted by level, then key
//     per feature: value u32, mask u8 | comp flows, packets, bytes 3 x u64
//
// Encoding is deterministic: equal trees encode to equal bytes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowtree/flowtree.hpp"

namespace flowtree {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 56;

std::vector<std::uint8_t> serialize(const Flowtree& tree);

/// Throws DecodeError with the matching kind.
Flowtree deserialize(std::span<const std::uint8_t> bytes);

std::size_t encoded_size(const Flowtree& tree);

}  // namespace flowtree
