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

#include "flowtree/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <sstream>

#include "flowtree/errors.hpp"

namespace flowtree {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Aggregator make_aggregator(FlowDB& db, const IngestOptions& opts, IngestSummary& out) {
  return Aggregator(opts.agg, [&db, &opts, &out](const TreeKey& key, Flowtree&& tree) {
    db.put(key, tree, opts.mode);
    ++out.trees_written;
  });
}

}  // namespace

std::string IngestSummary::to_string() const {
  std::ostringstream o;
  o << "inputs=" << inputs.size() << " skipped=" << files_skipped << " records=" << records
    << " malformed=" << malformed << " late=" << late_records << " trees=" << trees_written
    << " seconds=" << seconds;
  return o.str();
}

std::string RollupSummary::to_string() const {
  std::ostringstream o;
  o << "written=" << written << " present=" << already_present << " seconds=" << seconds;
  return o.str();
}

IngestSummary ingest_files(FlowDB& db, const std::vector<std::filesystem::path>& paths,
                           const IngestOptions& opts) {
  const auto t0 = Clock::now();
  IngestSummary out;
  std::vector<std::pair<std::filesystem::path, std::string>> todo;
  for (const auto& p : paths) {
    std::string digest = file_digest(p);
    if (opts.dedup && db.has_ingested(digest)) {
      ++out.files_skipped;
      continue;
    }
    // Validation pass: format and quality errors surface before any write.
    auto reader = LineReader::open_file(p.string());
    parse_input(*reader, [](const FlowRecord&) {}, opts.parse);
    todo.emplace_back(p, std::move(digest));
  }
  Aggregator agg = make_aggregator(db, opts, out);
  for (const auto& [p, digest] : todo) {
    auto reader = LineReader::open_file(p.string());
    IngestReport rep = parse_input(*reader, [&agg](const FlowRecord& r) { agg.add(r); }, opts.parse);
    rep.source = p.string();
    out.records += rep.records;
    out.malformed += rep.malformed;
    out.inputs.push_back(std::move(rep));
  }
  agg.flush();
  for (const auto& [p, digest] : todo) {
    if (opts.dedup) db.mark_ingested(digest);
  }
  out.late_records = agg.late_records();
  out.seconds = since(t0);
  return out;
}

IngestSummary ingest_records(FlowDB& db, std::span<const FlowRecord> records,
                             const IngestOptions& opts) {
  const auto t0 = Clock::now();
  IngestSummary out;
  Aggregator agg = make_aggregator(db, opts, out);
  for (const auto& r : records) agg.add(r);
  agg.flush();
  out.records = records.size();
  out.late_records = agg.late_records();
  out.seconds = since(t0);
  return out;
}

namespace {

/// Merges groups of stored trees into `target`-keyed trees. `group_of`
/// maps a source key to its destination key.
template <typename GroupOf, typename Build>
void materialize(FlowDB& db, const std::vector<TreeKey>& sources, GroupOf group_of, Build build,
                 bool force, RollupSummary& out) {
  std::map<TreeKey, std::vector<TreeKey>> groups;
  for (const auto& k : sources) groups[group_of(k)].push_back(k);
  for (const auto& [dest, members] : groups) {
    if (!force && db.contains(dest)) {
      ++out.already_present;
      continue;
    }
    std::vector<std::shared_ptr<const Flowtree>> held;
    std::vector<KeyedTree> keyed;
    for (const auto& k : members) {
      held.push_back(db.get(k));
      keyed.emplace_back(k, held.back().get());
    }
    auto [key, tree] = build(std::span<const KeyedTree>(keyed));
    db.put(key, tree, PutMode::kOverwrite);
    ++out.written;
  }
}

}  // namespace

RollupSummary build_rollups(FlowDB& db, const RollupOptions& opts) {
  const auto t0 = Clock::now();
  RollupSummary out;
  constexpr std::uint64_t kForever = ~std::uint64_t{0};
  for (FeatureSetId fs : opts.feature_sets) {
    const std::set<Granularity> stored = db.granularities(fs, false);
    if (stored.empty()) continue;
    const Granularity base = *stored.begin();
    std::vector<Granularity> levels{base};
    for (Granularity g : opts.targets) {
      if (duration_seconds(g) > duration_seconds(base) && divides(base, g)) levels.push_back(g);
    }
    std::sort(levels.begin(), levels.end(),
              [](Granularity a, Granularity b) { return duration_seconds(a) < duration_seconds(b); });
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const std::uint32_t cap = opts.max_nodes[static_cast<std::size_t>(fs)];

    for (std::size_t i = 1; i < levels.size(); ++i) {
      const Granularity target = levels[i];
      Granularity source = base;
      for (std::size_t j = i; j-- > 0;) {
        if (divides(levels[j], target)) {
          source = levels[j];
          break;
        }
      }
      materialize(
          db, db.range(SiteFilter::any(), fs, source, 0, kForever),
          [&](const TreeKey& k) { return TreeKey{k.site, fs, target, align_down(k.start, target)}; },
          [&](std::span<const KeyedTree> trees) { return rollup(trees, target, cap, opts.workers); },
          opts.force, out);
    }
    if (!opts.all_sites) continue;
    for (Granularity g : levels) {
      materialize(
          db, db.range(SiteFilter::any(), fs, g, 0, kForever),
          [&](const TreeKey& k) { return TreeKey{kAllSites, fs, g, k.start}; },
          [&](std::span<const KeyedTree> trees) { return sites_rollup(trees, cap, opts.workers); },
          opts.force, out);
    }
  }
  out.seconds = since(t0);
  return out;
}

}  // namespace flowtree
