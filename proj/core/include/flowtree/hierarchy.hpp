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

// Feature hierarchies and the joined multi-feature key used as node identity
// in every Flowtree.
//
// A key assigns each feature of its feature set a (value, mask) pair where
// the mask is a prefix length. In a joined hierarchy all masks shorten in
// lockstep: the parent of 10.1.2.0|24 80|16 is 10.1.2.0|23 80|15. A feature
// whose mask reaches zero saturates while the others keep shortening, so a
// feature set with maximum feature width H has exactly H + 1 levels and
// every level has one fixed mask "shape".

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "flowtree/flow_record.hpp"

namespace flowtree {

enum class Feature : std::uint8_t {
  kSrcIp,
  kDstIp,
  kSrcPort,
  kDstPort,
  kProto,
};

constexpr std::uint8_t feature_width(Feature f) {
  switch (f) {
    case Feature::kSrcIp:
    case Feature::kDstIp:
      return 32;
    case Feature::kSrcPort:
    case Feature::kDstPort:
      return 16;
    case Feature::kProto:
      return 8;
  }
  return 0;
}

std::string_view feature_name(Feature f);
std::optional<Feature> parse_feature(std::string_view name);

enum class FeatureSetId : std::uint8_t {
  kSI = 0,
  kDI,
  kSP,
  kDP,
  kSIDI,
  kSPDP,
  kSISP,
  kSIDP,
  kDISP,
  kDIDP,
  kFull,
};

inline constexpr std::size_t kFeatureSetCount = 11;
inline constexpr std::size_t kMaxFeatures = 4;

/// Static description of one of the eleven feature sets. Features are kept
/// in canonical order (src_ip, dst_ip, src_port, dst_port).
class FeatureSet {
 public:
  static const FeatureSet& get(FeatureSetId id);

  FeatureSetId id() const { return id_; }
  std::string_view name() const { return name_; }
  std::span<const Feature> features() const {
    return {features_.data(), count_};
  }
  std::size_t size() const { return count_; }
  std::uint8_t width(std::size_t i) const { return feature_width(features_[i]); }
  /// Number of levels below the root (H); the leaf level equals depth().
  std::uint8_t depth() const { return depth_; }
  /// Slot of `f` in keys of this set, or nullopt when absent.
  std::optional<std::size_t> slot_of(Feature f) const;
  /// Mask of slot `i` at hierarchy level `level` (0 = root).
  std::uint8_t mask_at_level(std::size_t i, std::uint8_t level) const;

 private:
  FeatureSet(FeatureSetId id, std::string_view name,
             std::array<Feature, kMaxFeatures> features, std::size_t count);

  FeatureSetId id_;
  std::string_view name_;
  std::array<Feature, kMaxFeatures> features_;
  std::size_t count_;
  std::uint8_t depth_;

  friend struct FeatureSetTable;
};

const std::array<FeatureSetId, kFeatureSetCount>& all_feature_sets();
std::string_view to_string(FeatureSetId id);
std::optional<FeatureSetId> parse_feature_set(std::string_view name);

/// Smallest feature set containing every feature flagged in `wanted`
/// (indexed by Feature; kProto is ignored). Three features map to FULL.
FeatureSetId covering_feature_set(std::span<const bool, 4> wanted);

/// A point in a joined feature hierarchy. Slots beyond the feature set's
/// size are always zero.
struct FlowKey {
  FeatureSetId feature_set = FeatureSetId::kSI;
  std::array<std::uint8_t, kMaxFeatures> masks{};
  std::array<std::uint32_t, kMaxFeatures> values{};

  static FlowKey root(FeatureSetId fs) { return FlowKey{fs, {}, {}}; }

  bool is_root() const { return masks == std::array<std::uint8_t, kMaxFeatures>{}; }

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

/// Lexicographic order over (value, mask) per slot. Used for deterministic
/// tie-breaking and serialization order.
std::strong_ordering compare_lex(const FlowKey& a, const FlowKey& b);

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.feature_set) * 0x9E3779B97F4A7C15ULL;
    for (std::size_t i = 0; i < kMaxFeatures; ++i) {
      std::uint64_t v = (static_cast<std::uint64_t>(k.values[i]) << 8) | k.masks[i];
      h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
      h *= 0xBF58476D1CE4E5B9ULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

/// Value with all bits below the mask cleared.
constexpr std::uint32_t prefix_of(std::uint32_t value, std::uint8_t mask,
                                  std::uint8_t width) {
  if (mask == 0) return 0;
  const std::uint32_t low = width - mask;
  return low >= 32 ? 0 : (value >> low) << low;
}

/// Clears the bits below each mask. Throws InvalidMask if a mask exceeds
/// its feature width or an unused slot is set.
FlowKey canonicalize(const FlowKey& key);
bool is_canonical(const FlowKey& key);

/// One level up the joined hierarchy: every nonzero mask is decremented.
/// Throws NoParent for the root.
FlowKey next_parent(const FlowKey& key);

enum class AncestorMode { kStrict, kOrEqual };

/// True iff `a` dominates `b`: every mask of `a` is at most the matching
/// mask of `b` and the values agree on the top mask(a) bits. Throws
/// FeatureSetMismatch when the keys belong to different feature sets.
bool is_ancestor(const FlowKey& a, const FlowKey& b,
                 AncestorMode mode = AncestorMode::kOrEqual);

/// True iff no concrete flow can match both keys.
bool is_disjoint(const FlowKey& a, const FlowKey& b);

/// Leaf key (every mask at full width) carrying the flow's features.
FlowKey key_from_flow(const FlowRecord& flow, FeatureSetId fs);

/// Level of a key whose masks match one of the feature set's level shapes,
/// nullopt otherwise.
std::optional<std::uint8_t> level_of(const FlowKey& key);

/// Deepest level whose shape is dominated by the key's masks; every
/// level-shaped ancestor of `key` lives at or above it.
std::uint8_t deepest_covering_level(const FlowKey& key);

/// Truncates `key` to the level shape `level`. Requires level <=
/// deepest_covering_level(key).
FlowKey truncate_to_level(const FlowKey& key, std::uint8_t level);

// Textual syntax: `a.b.c.d|m` for IPs, `p|m` for ports, `ANY` for mask 0.
std::string format_ipv4(std::uint32_t ip);
std::optional<std::uint32_t> parse_ipv4(std::string_view text);
std::string format_value(Feature f, std::uint32_t value, std::uint8_t mask);
/// Parses `ANY`, `v|m` or a bare value (full mask). Throws InvalidKey.
std::pair<std::uint32_t, std::uint8_t> parse_value(Feature f,
                                                   std::string_view text);

/// Renders `feature=value` pairs in canonical order separated by spaces,
/// e.g. `dst_ip=10.1.2.0|24 dst_port=80|16`.
std::string to_string(const FlowKey& key);
/// Inverse of to_string. Features omitted from the text are ANY.
FlowKey parse_key(FeatureSetId fs, std::string_view text);

}  // namespace flowtree
