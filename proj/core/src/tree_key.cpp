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

#include "flowtree/tree_key.hpp"

#include <charconv>
#include <vector>

namespace flowtree {
namespace {

template <typename T>
std::optional<T> parse_uint(std::string_view text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::k1m: return "1m";
    case Granularity::k15m: return "15m";
    case Granularity::k1h: return "1h";
    case Granularity::k1d: return "1d";
    case Granularity::k1w: return "1w";
  }
  return "?";
}

std::optional<Granularity> parse_granularity(std::string_view text) {
  for (Granularity g : kAllGranularities) {
    if (to_string(g) == text) return g;
  }
  return std::nullopt;
}

std::optional<Granularity> granularity_of_seconds(std::uint64_t seconds) {
  for (Granularity g : kAllGranularities) {
    if (duration_seconds(g) == seconds) return g;
  }
  return std::nullopt;
}

std::string site_to_string(std::uint32_t site) {
  return site == kAllSites ? "ALL" : std::to_string(site);
}

std::string to_string(const TreeKey& key) {
  return site_to_string(key.site) + "-" + std::string(to_string(key.feature_set)) + "-" +
         std::string(to_string(key.granularity)) + "-" + std::to_string(key.start);
}

std::optional<TreeKey> parse_tree_key(std::string_view text) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto dash = text.find('-');
    parts.push_back(text.substr(0, dash));
    if (dash == std::string_view::npos) break;
    text.remove_prefix(dash + 1);
  }
  if (parts.size() != 4) return std::nullopt;
  TreeKey key;
  if (parts[0] == "ALL") {
    key.site = kAllSites;
  } else if (auto s = parse_uint<std::uint32_t>(parts[0]); s && *s != kAllSites) {
    key.site = *s;
  } else {
    return std::nullopt;
  }
  auto fs = parse_feature_set(parts[1]);
  auto g = parse_granularity(parts[2]);
  auto start = parse_uint<std::uint64_t>(parts[3]);
  if (!fs || !g || !start) return std::nullopt;
  key.feature_set = *fs;
  key.granularity = *g;
  key.start = *start;
  if (!key.aligned()) return std::nullopt;
  return key;
}

}  // namespace flowtree
