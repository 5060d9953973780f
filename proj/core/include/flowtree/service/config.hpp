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
// Operator configuration shared by the CLI, the shell and the HTTP server.
// Config files are line-oriented `key = value` text; `#` starts a comment.

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowtree/flowagg.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/hierarchy.hpp"
#include "flowtree/tree_key.hpp"

namespace flowtree::service {

/// Store root used when no --store flag is given; overrides the config file.
inline constexpr const char* kStoreEnvVar = "FLOWTREE_STORE";

struct ServerConfig {
  std::filesystem::path store = "flowtree-store";
  /// host:port; loopback unless configured otherwise.
  std::string listen = "127.0.0.1:8080";
  std::size_t cache_trees = kDefaultCacheTrees;
  std::size_t workers = 1;
  std::chrono::milliseconds query_timeout{60000};
  std::size_t max_body_bytes = std::size_t{64} << 20;
  Granularity base = Granularity::k15m;
  std::vector<Granularity> rollups{Granularity::k1h, Granularity::k1d};
  std::vector<FeatureSetId> feature_sets{all_feature_sets().begin(), all_feature_sets().end()};
  std::array<std::uint32_t, kFeatureSetCount> max_nodes = AggConfig::default_caps();

  /// Applies one entry. Throws InvalidArgument on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  /// Makes the store path absolute and checks cross-field invariants.
  void normalize();

  std::pair<std::string, int> listen_endpoint() const;
  AggConfig agg_config() const;
  StoreOptions store_options() const;
};

/// Applies every entry of `text`; errors name the 1-based line.
void apply_config_text(ServerConfig& cfg, std::string_view text);
/// Throws StorageError when unreadable.
void apply_config_file(ServerConfig& cfg, const std::filesystem::path& path);

}  // namespace flowtree::service
