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

#include "flowtree/flowdb.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flowtree/errors.hpp"
#include "flowtree/serialize.hpp"

namespace flowtree {
namespace fs = std::filesystem;
namespace {

constexpr const char* kIntentFile = "INTENT";
constexpr const char* kIngestLedger = "ingested.txt";

std::vector<std::uint8_t> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StorageError("cannot read " + p.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw StorageError("read failed for " + p.string());
  return bytes;
}

void write_all(const fs::path& p, const void* data, std::size_t n, bool sync) {
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot create " + p.string() + ": " + std::strerror(errno));
  const auto* ptr = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::write(fd, ptr, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw StorageError("write failed for " + p.string() + ": " + std::strerror(err));
    }
    ptr += w;
    n -= static_cast<std::size_t>(w);
  }
  if (sync && ::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw StorageError("fsync failed for " + p.string() + ": " + std::strerror(err));
  }
  if (::close(fd) != 0) throw StorageError("close failed for " + p.string());
}

}  // namespace

bool SiteFilter::matches(std::uint32_t site) const {
  switch (kind) {
    case Kind::kAny: return site != kAllSites;
    case Kind::kAll: return site == kAllSites;
    case Kind::kSet: return sites.count(site) != 0;
  }
  return false;
}

double StoreStats::rollup_overhead(Granularity base) const {
  auto it = per_site_by_granularity.find(base);
  if (it == per_site_by_granularity.end() || it->second.bytes == 0) return 0.0;
  return static_cast<double>(total.bytes - it->second.bytes) / static_cast<double>(it->second.bytes);
}

std::string StoreStats::to_string() const {
  std::ostringstream out;
  out << "trees=" << total.trees << " bytes=" << total.bytes << " cache_hits=" << cache_hits
      << " cache_misses=" << cache_misses << " disk_reads=" << disk_reads << " cached_trees=" << cached_trees
      << " puts=" << puts << " merges=" << merges << '\n';
  for (const auto& [g, b] : per_site_by_granularity) {
    out << "granularity=" << flowtree::to_string(g) << " scope=sites trees=" << b.trees << " bytes=" << b.bytes
        << '\n';
  }
  for (const auto& [g, b] : all_sites_by_granularity) {
    out << "granularity=" << flowtree::to_string(g) << " scope=ALL trees=" << b.trees << " bytes=" << b.bytes
        << '\n';
  }
  for (const auto& [k, b] : by_kind) {
    out << "granularity=" << flowtree::to_string(k.first) << " feature_set=" << flowtree::to_string(k.second)
        << " trees=" << b.trees << " bytes=" << b.bytes << '\n';
  }
  return out.str();
}

FlowDB::FlowDB(fs::path root, StoreOptions opts) : root_(std::move(root)), opts_(opts) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StorageError("cannot create store root " + root_.string() + ": " + ec.message());
  root_ = fs::canonical(root_, ec);
  if (ec) throw StorageError("cannot resolve store root: " + ec.message());
  recover();
}

fs::path FlowDB::path_of(const TreeKey& key) const {
  return root_ / std::string(to_string(key.feature_set)) / std::string(to_string(key.granularity)) /
         (to_string(key) + ".ftr");
}

void FlowDB::recover() {
  std::error_code ec;
  // An interrupted write leaves at most a temporary file behind; the
  // renamed target, if any, is complete.
  fs::remove(root_ / kIntentFile, ec);
  for (auto it = fs::recursive_directory_iterator(root_, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const fs::path& p = it->path();
    if (p.extension() == ".tmp") {
      fs::remove(p, ec);
      continue;
    }
    if (p.extension() != ".ftr") continue;
    auto key = parse_tree_key(p.stem().string());
    if (!key || path_of(*key) != p) continue;
    index_[*key] = IndexEntry{*key, Location::kDisk, fs::file_size(p), 0};
  }
  if (ec) throw StorageError("store scan failed: " + ec.message());
  std::ifstream ledger(root_ / kIngestLedger);
  for (std::string line; std::getline(ledger, line);) {
    if (!line.empty()) ingested_.insert(line);
  }
}

void FlowDB::write_file(const TreeKey& key, const std::vector<std::uint8_t>& bytes) {
  const fs::path target = path_of(key);
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw StorageError("cannot create " + target.parent_path().string() + ": " + ec.message());
  const std::string intent = to_string(key) + "\n";
  write_all(root_ / kIntentFile, intent.data(), intent.size(), opts_.sync);
  fs::path tmp = target;
  tmp += ".tmp";
  write_all(tmp, bytes.data(), bytes.size(), opts_.sync);
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StorageError("cannot install " + target.string() + ": " + ec.message());
  }
}

void FlowDB::put(const TreeKey& key, const Flowtree& tree, PutMode mode) {
  if (!key.aligned()) throw KeyMismatch("start of " + to_string(key) + " is not aligned");
  if (tree.feature_set() != key.feature_set) {
    throw KeyMismatch(std::string(to_string(tree.feature_set())) + " tree stored under " + to_string(key));
  }
  std::lock_guard writer(write_mu_);
  std::shared_ptr<const Flowtree> stored;
  if (mode == PutMode::kMerge && contains(key)) {
    stored = std::make_shared<const Flowtree>(Flowtree::merge(*get(key), tree));
    ++merges_;
  } else {
    stored = std::make_shared<const Flowtree>(tree);
  }
  const auto bytes = serialize(*stored);
  write_file(key, bytes);
  if (fault_hook_) fault_hook_(key);
  {
    std::unique_lock lock(index_mu_);
    index_[key] = IndexEntry{key, Location::kDisk, bytes.size(), 0};
  }
  std::error_code ec;
  fs::remove(root_ / kIntentFile, ec);
  cache_insert(key, std::move(stored));
  ++puts_;
}

std::shared_ptr<const Flowtree> FlowDB::load(const TreeKey& key) {
  const auto bytes = read_all(path_of(key));
  ++disk_reads_;
  try {
    return std::make_shared<const Flowtree>(deserialize(bytes));
  } catch (const DecodeError& e) {
    throw StorageError("corrupt tree file " + path_of(key).string() + ": " + e.what());
  }
}

std::shared_ptr<const Flowtree> FlowDB::get(const TreeKey& key) {
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.pos);
      ++access_clock_;
      ++hits_;
      return it->second.tree;
    }
  }
  if (!contains(key)) throw NotFound("no tree " + to_string(key));
  ++misses_;
  auto tree = load(key);
  cache_insert(key, tree);
  return tree;
}

std::vector<std::uint8_t> FlowDB::get_bytes(const TreeKey& key) const {
  if (!contains(key)) throw NotFound("no tree " + to_string(key));
  return read_all(path_of(key));
}

bool FlowDB::contains(const TreeKey& key) const {
  std::shared_lock lock(index_mu_);
  return index_.count(key) != 0;
}

std::optional<IndexEntry> FlowDB::entry(const TreeKey& key) const {
  std::optional<IndexEntry> e;
  {
    std::shared_lock lock(index_mu_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    e = it->second;
  }
  std::lock_guard lock(cache_mu_);
  if (cache_.count(key)) e->location = Location::kMemory;
  e->last_access = access_clock_;
  return e;
}

void FlowDB::cache_insert(const TreeKey& key, std::shared_ptr<const Flowtree> tree) {
  std::lock_guard lock(cache_mu_);
  ++access_clock_;
  if (auto it = cache_.find(key); it != cache_.end()) {
    it->second.tree = std::move(tree);
    lru_.splice(lru_.begin(), lru_, it->second.pos);
  } else {
    lru_.push_front(key);
    cache_.emplace(key, Cached{std::move(tree), lru_.begin()});
  }
  evict_locked();
}

void FlowDB::evict_locked() {
  while (cache_.size() > opts_.max_cached_trees) {
    cache_.erase(lru_.back());
    lru_.pop_back();
  }
}

void FlowDB::evict() {
  std::lock_guard lock(cache_mu_);
  evict_locked();
}

void FlowDB::drop_cache() {
  std::lock_guard lock(cache_mu_);
  cache_.clear();
  lru_.clear();
}

void FlowDB::set_cache_limit(std::size_t trees) {
  std::lock_guard lock(cache_mu_);
  opts_.max_cached_trees = trees;
  evict_locked();
}

std::vector<TreeKey> FlowDB::range(const SiteFilter& sites, FeatureSetId fs, Granularity g, std::uint64_t from,
                                   std::uint64_t to) const {
  std::vector<TreeKey> out;
  std::shared_lock lock(index_mu_);
  for (auto it = index_.lower_bound(TreeKey{0, fs, g, 0}); it != index_.end(); ++it) {
    const TreeKey& k = it->first;
    if (k.feature_set != fs || k.granularity != g) break;
    if (k.start >= from && k.start < to && sites.matches(k.site)) out.push_back(k);
  }
  return out;
}

std::vector<TreeKey> FlowDB::keys() const {
  std::shared_lock lock(index_mu_);
  std::vector<TreeKey> out;
  out.reserve(index_.size());
  for (const auto& [k, e] : index_) out.push_back(k);
  return out;
}

std::vector<std::uint32_t> FlowDB::sites() const {
  std::set<std::uint32_t> s;
  std::shared_lock lock(index_mu_);
  for (const auto& [k, e] : index_) {
    if (k.site != kAllSites) s.insert(k.site);
  }
  return {s.begin(), s.end()};
}

std::set<Granularity> FlowDB::granularities(FeatureSetId fs, bool all_sites) const {
  std::set<Granularity> out;
  std::shared_lock lock(index_mu_);
  for (const auto& [k, e] : index_) {
    if (k.feature_set == fs && (!all_sites || k.site == kAllSites)) out.insert(k.granularity);
  }
  return out;
}

std::optional<std::pair<std::uint64_t, std::uint64_t>> FlowDB::time_span() const {
  std::shared_lock lock(index_mu_);
  if (index_.empty()) return std::nullopt;
  std::uint64_t lo = ~0ULL, hi = 0;
  for (const auto& [k, e] : index_) {
    lo = std::min(lo, k.start);
    hi = std::max(hi, k.end());
  }
  return std::pair{lo, hi};
}

StoreStats FlowDB::stats() const {
  StoreStats s;
  {
    std::shared_lock lock(index_mu_);
    for (const auto& [k, e] : index_) {
      for (StoreStats::Bucket* b :
           {&s.total, &s.by_kind[{k.granularity, k.feature_set}],
            k.site == kAllSites ? &s.all_sites_by_granularity[k.granularity]
                                : &s.per_site_by_granularity[k.granularity]}) {
        ++b->trees;
        b->bytes += e.size_bytes;
      }
    }
  }
  {
    std::lock_guard lock(cache_mu_);
    s.cached_trees = cache_.size();
  }
  s.cache_hits = hits_;
  s.cache_misses = misses_;
  s.disk_reads = disk_reads_;
  s.puts = puts_;
  s.merges = merges_;
  return s;
}

bool FlowDB::has_ingested(const std::string& digest) const {
  std::shared_lock lock(index_mu_);
  return ingested_.count(digest) != 0;
}

void FlowDB::mark_ingested(const std::string& digest) {
  std::unique_lock lock(index_mu_);
  if (!ingested_.insert(digest).second) return;
  std::ofstream out(root_ / kIngestLedger, std::ios::app);
  out << digest << '\n';
  if (!out) throw StorageError("cannot update ingest ledger");
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0), adler = adler32(0L, Z_NULL, 0);
  std::uint64_t size = 0;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<uInt>(in.gcount());
    if (n == 0) break;
    crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), n);
    adler = adler32(adler, reinterpret_cast<const Bytef*>(buf.data()), n);
    size += n;
  }
  char out[64];
  std::snprintf(out, sizeof out, "%08lx%08lx-%llu", crc, adler, static_cast<unsigned long long>(size));
  return out;
}

}  // namespace flowtree
