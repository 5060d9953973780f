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
#include "flowtree/service/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "flowtree/errors.hpp"

namespace flowtree::service {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw InvalidArgument("config " + std::string(key) + ": expected an unsigned integer, got '" +
                          std::string(v) + "'");
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

Granularity to_granularity(std::string_view key, std::string_view v) {
  auto g = parse_granularity(v);
  if (!g) throw InvalidArgument("config " + std::string(key) + ": unknown granularity '" + std::string(v) + "'");
  return *g;
}

FeatureSetId to_feature_set(std::string_view key, std::string_view v) {
  auto fs = parse_feature_set(v);
  if (!fs) throw InvalidArgument("config " + std::string(key) + ": unknown feature set '" + std::string(v) + "'");
  return *fs;
}

std::uint32_t to_cap(std::string_view key, std::string_view v) {
  const auto n = to_uint(key, v);
  if (n < kMinMaxNodes || n > 0xFFFFFFFFull) {
    throw InvalidArgument("config " + std::string(key) + ": node cap must be at least " +
                          std::to_string(kMinMaxNodes));
  }
  return static_cast<std::uint32_t>(n);
}

}  // namespace

void ServerConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "store") {
    store = std::string(value);
  } else if (key == "listen") {
    listen = std::string(value);
    listen_endpoint();
  } else if (key == "cache_trees") {
    cache_trees = to_uint(key, value);
  } else if (key == "workers") {
    workers = to_uint(key, value);
    if (workers == 0) throw InvalidArgument("config workers: must be at least 1");
  } else if (key == "query_timeout_ms") {
    query_timeout = std::chrono::milliseconds(to_uint(key, value));
  } else if (key == "max_body_bytes") {
    max_body_bytes = to_uint(key, value);
  } else if (key == "base_granularity") {
    base = to_granularity(key, value);
  } else if (key == "rollups") {
    rollups.clear();
    for (auto item : split_list(value)) rollups.push_back(to_granularity(key, item));
  } else if (key == "feature_sets") {
    feature_sets.clear();
    for (auto item : split_list(value)) feature_sets.push_back(to_feature_set(key, item));
    if (feature_sets.empty()) throw InvalidArgument("config feature_sets: empty list");
  } else if (key == "max_nodes") {
    max_nodes.fill(to_cap(key, value));
  } else if (key.starts_with("max_nodes.")) {
    const auto fs = to_feature_set(key, key.substr(10));
    max_nodes[static_cast<std::size_t>(fs)] = to_cap(key, value);
  } else {
    throw InvalidArgument("config: unknown key '" + std::string(key) + "'");
  }
}

void ServerConfig::normalize() {
  if (workers == 0) throw InvalidArgument("config workers: must be at least 1");
  store = std::filesystem::absolute(store).lexically_normal();
  for (Granularity g : rollups) {
    if (g <= base || !divides(base, g)) {
      throw InvalidArgument("config rollups: " + std::string(to_string(g)) +
                            " is not a coarser multiple of the base granularity");
    }
  }
  listen_endpoint();
}

std::pair<std::string, int> ServerConfig::listen_endpoint() const {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw InvalidArgument("config listen: expected host:port, got '" + listen + "'");
  }
  const auto port = to_uint("listen", std::string_view(listen).substr(colon + 1));
  if (port > 65535) throw InvalidArgument("config listen: port out of range");
  return {listen.substr(0, colon), static_cast<int>(port)};
}

AggConfig ServerConfig::agg_config() const {
  AggConfig a;
  a.base = base;
  a.feature_sets = feature_sets;
  a.max_nodes = max_nodes;
  a.rollups = rollups;
  return a;
}

StoreOptions ServerConfig::store_options() const {
  StoreOptions o;
  o.max_cached_trees = cache_trees;
  return o;
}

void apply_config_text(ServerConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_config_file(ServerConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

}  // namespace flowtree::service
