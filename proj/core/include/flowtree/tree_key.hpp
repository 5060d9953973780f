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

// Time granularities and the address of one stored tree.

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

#include "flowtree/hierarchy.hpp"

namespace flowtree {

enum class Granularity : std::uint8_t { k1m, k15m, k1h, k1d, k1w };

inline constexpr std::array<Granularity, 5> kAllGranularities = {
    Granularity::k1m, Granularity::k15m, Granularity::k1h, Granularity::k1d, Granularity::k1w};

constexpr std::uint64_t duration_seconds(Granularity g) {
  switch (g) {
    case Granularity::k1m: return 60;
    case Granularity::k15m: return 900;
    case Granularity::k1h: return 3600;
    case Granularity::k1d: return 86400;
    case Granularity::k1w: return 604800;
  }
  return 0;
}

/// Bins are half-open [start, start + d) and aligned to the epoch.
constexpr std::uint64_t align_down(std::uint64_t ts, Granularity g) {
  return ts - ts % duration_seconds(g);
}

/// True iff `coarse` tiles exactly into whole `fine` bins.
constexpr bool divides(Granularity fine, Granularity coarse) {
  return duration_seconds(coarse) % duration_seconds(fine) == 0;
}

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view text);
std::optional<Granularity> granularity_of_seconds(std::uint64_t seconds);

/// Reserved site id of all-sites rollups.
inline constexpr std::uint32_t kAllSites = 0xFFFFFFFFu;

struct TreeKey {
  std::uint32_t site = 0;
  FeatureSetId feature_set = FeatureSetId::kSI;
  Granularity granularity = Granularity::k15m;
  std::uint64_t start = 0;

  std::uint64_t end() const { return start + duration_seconds(granularity); }
  bool aligned() const { return start % duration_seconds(granularity) == 0; }

  /// Index order: feature set, granularity, site, start.
  friend auto operator<=>(const TreeKey& a, const TreeKey& b) {
    return std::tie(a.feature_set, a.granularity, a.site, a.start) <=>
           std::tie(b.feature_set, b.granularity, b.site, b.start);
  }
  friend bool operator==(const TreeKey&, const TreeKey&) = default;
};

/// `<site>-<fs>-<gran>-<start>`, site ALL rendered as `ALL`.
std::string to_string(const TreeKey& key);
/// Inverse of to_string; nullopt for malformed or unaligned keys.
std::optional<TreeKey> parse_tree_key(std::string_view text);
std::string site_to_string(std::uint32_t site);

}  // namespace flowtree
