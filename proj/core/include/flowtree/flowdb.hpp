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

// Directory-backed tree store with an ordered in-memory index and an LRU
// cache of decoded trees.
//
// Layout: <root>/<fs>/<gran>/<site>-<fs>-<gran>-<start>.ftr. A write goes to
// a temporary file that is renamed over the target while an intent file
// names the key in flight. The index is rebuilt from the directory on open,
// so a crash between rename and index update loses nothing.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "flowtree/flowtree.hpp"
#include "flowtree/tree_key.hpp"

namespace flowtree {

inline constexpr std::size_t kDefaultCacheTrees = 4096;

struct StoreOptions {
  std::size_t max_cached_trees = kDefaultCacheTrees;
  /// fsync every written file; off by default since process restarts only
  /// need the rename to have happened.
  bool sync = false;
};

enum class PutMode { kMerge, kOverwrite };

/// Which per-site trees a range scan returns. kAny is every real site,
/// kAll is only the all-sites rollup, kSet an explicit list.
struct SiteFilter {
  enum class Kind { kAny, kAll, kSet } kind = Kind::kAny;
  std::set<std::uint32_t> sites;

  static SiteFilter any() { return {}; }
  static SiteFilter all() { return {Kind::kAll, {}}; }
  static SiteFilter of(std::set<std::uint32_t> s) { return {Kind::kSet, std::move(s)}; }
  bool matches(std::uint32_t site) const;
};

enum class Location { kMemory, kDisk };

struct IndexEntry {
  TreeKey key;
  Location location = Location::kDisk;
  std::uint64_t size_bytes = 0;
  std::uint64_t last_access = 0;
};

struct StoreStats {
  struct Bucket {
    std::uint64_t trees = 0;
    std::uint64_t bytes = 0;
  };
  Bucket total;
  std::map<std::pair<Granularity, FeatureSetId>, Bucket> by_kind;
  std::map<Granularity, Bucket> per_site_by_granularity;
  std::map<Granularity, Bucket> all_sites_by_granularity;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t disk_reads = 0;
  std::uint64_t cached_trees = 0;
  std::uint64_t puts = 0;
  std::uint64_t merges = 0;

  /// Bytes of everything except per-site trees at `base`, divided by the
  /// per-site `base` bytes.
  double rollup_overhead(Granularity base = Granularity::k15m) const;
  std::string to_string() const;
};

class FlowDB {
 public:
  /// Creates the root if needed and rebuilds the index from disk.
  explicit FlowDB(std::filesystem::path root, StoreOptions opts = {});

  FlowDB(const FlowDB&) = delete;
  FlowDB& operator=(const FlowDB&) = delete;

  const std::filesystem::path& root() const { return root_; }

  /// Stores `tree`; with kMerge an existing tree under the key is merged
  /// in. Throws KeyMismatch, StorageError.
  void put(const TreeKey& key, const Flowtree& tree, PutMode mode = PutMode::kMerge);
  /// Throws NotFound.
  std::shared_ptr<const Flowtree> get(const TreeKey& key);
  /// Raw encoded bytes of a stored tree. Throws NotFound.
  std::vector<std::uint8_t> get_bytes(const TreeKey& key) const;
  bool contains(const TreeKey& key) const;
  std::optional<IndexEntry> entry(const TreeKey& key) const;

  /// Keys with start in [from, to) sorted by (site, start).
  std::vector<TreeKey> range(const SiteFilter& sites, FeatureSetId fs, Granularity g,
                             std::uint64_t from, std::uint64_t to) const;
  std::vector<TreeKey> keys() const;
  /// Real sites with at least one tree, ascending.
  std::vector<std::uint32_t> sites() const;
  /// Granularities stored for a feature set, optionally only ALL trees.
  std::set<Granularity> granularities(FeatureSetId fs, bool all_sites) const;
  /// [min start, max end) over every stored tree; nullopt when empty.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> time_span() const;

  /// Drops least recently used trees until the cache limit holds.
  void evict();
  /// Empties the cache (cold-cache benchmarking).
  void drop_cache();
  void set_cache_limit(std::size_t trees);

  StoreStats stats() const;

  /// Ingest de-duplication by content digest.
  bool has_ingested(const std::string& digest) const;
  void mark_ingested(const std::string& digest);

  /// Test hook called after the file is durable and before the index sees
  /// it; throwing from it simulates a crash at that point.
  void set_fault_hook(std::function<void(const TreeKey&)> hook) { fault_hook_ = std::move(hook); }

  std::filesystem::path path_of(const TreeKey& key) const;

 private:
  void recover();
  void write_file(const TreeKey& key, const std::vector<std::uint8_t>& bytes);
  void cache_insert(const TreeKey& key, std::shared_ptr<const Flowtree> tree);
  void evict_locked();
  std::shared_ptr<const Flowtree> load(const TreeKey& key);

  std::filesystem::path root_;
  StoreOptions opts_;

  mutable std::shared_mutex index_mu_;
  std::map<TreeKey, IndexEntry> index_;
  std::set<std::string> ingested_;

  std::mutex write_mu_;

  mutable std::mutex cache_mu_;
  std::list<TreeKey> lru_;  // front = most recent
  struct Cached {
    std::shared_ptr<const Flowtree> tree;
    std::list<TreeKey>::iterator pos;
  };
  std::map<TreeKey, Cached> cache_;
  std::uint64_t access_clock_ = 0;

  std::atomic<std::uint64_t> hits_{0}, misses_{0}, disk_reads_{0}, puts_{0}, merges_{0};
  std::function<void(const TreeKey&)> fault_hook_;
};

/// Content digest used for ingest de-duplication.
std::string file_digest(const std::filesystem::path& path);

}  // namespace flowtree
