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

#include "flowtree/flowql/execute.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <memory>
#include <set>
#include <tuple>

#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/flowtree.hpp"

namespace flowtree::flowql {

namespace {

using Clock = std::chrono::steady_clock;

struct CellResult {
  std::vector<Row> rows;
  std::size_t fetched = 0;
  std::size_t merges = 0;
  bool done = false;
};

std::shared_ptr<const Flowtree> materialize(const FetchList& in, FeatureSetId fs, FlowDB& db,
                                            CellResult& stats) {
  if (in.keys.empty()) return std::make_shared<const Flowtree>(fs);
  std::vector<std::shared_ptr<const Flowtree>> trees;
  trees.reserve(in.keys.size());
  for (const auto& k : in.keys) trees.push_back(db.get(k));
  stats.fetched += trees.size();
  if (trees.size() == 1) return trees.front();
  std::vector<const Flowtree*> ptrs;
  for (const auto& t : trees) ptrs.push_back(t.get());
  stats.merges += 1;
  return std::make_shared<const Flowtree>(Flowtree::merge_all(ptrs));
}

Row make_row(const Unit& u, const PopReport& r, Counter c, bool partial) {
  Row row;
  row.bin_start = u.bin_start;
  row.bin_end = u.bin_end;
  row.site = u.site;
  row.site_label = u.site_label;
  row.key = r.key;
  row.counters = r.pop;
  row.exact = r.exact;
  row.partial = partial;
  row.score = static_cast<std::int64_t>(std::min<std::uint64_t>(r.pop.get(c), INT64_MAX));
  row.mini = u.mini;
  return row;
}

CellResult evaluate_cell(const Plan& plan, const Unit& u, FlowDB& db) {
  CellResult out;
  const MiniQuery& m = plan.minis[u.mini];
  const Select& s = plan.query.select;
  const Counter c = s.counter;
  const FlowKey& pattern = m.key;
  const std::uint8_t leaf = FeatureSet::get(m.feature_set).depth();
  const bool partial = std::any_of(u.inputs.begin(), u.inputs.end(),
                                   [](const FetchList& f) { return f.partial; });
  const bool empty = std::all_of(u.inputs.begin(), u.inputs.end(),
                                 [](const FetchList& f) { return f.keys.empty(); });
  auto dominated = [&](const FlowKey& k) { return is_ancestor(pattern, k); };
  auto dominated_leaf = [&](const FlowKey& k) { return level_of(k) == leaf && is_ancestor(pattern, k); };
  auto emit = [&](const std::vector<PopReport>& reports, bool keep_score) {
    for (const auto& r : reports) {
      Row row = make_row(u, r, c, partial);
      if (keep_score) row.score = r.score;
      out.rows.push_back(std::move(row));
    }
  };

  if (s.kind == SelectKind::kHc) {
    const auto a = materialize(u.inputs[0], m.feature_set, db, out);
    const auto b = materialize(u.inputs[1], m.feature_set, db, out);
    emit(Flowtree::heavy_changers(*a, *b, *s.count, c, dominated_leaf), false);
    out.done = true;
    return out;
  }
  const auto tree = materialize(u.inputs[0], m.feature_set, db, out);
  switch (s.kind) {
    case SelectKind::kPop: {
      Row row = make_row(u, tree->query(pattern), c, partial || empty);
      out.rows.push_back(std::move(row));
      break;
    }
    case SelectKind::kTop:
      emit(tree->top_k(*s.count, c, dominated_leaf), true);
      break;
    case SelectKind::kHhh: {
      std::vector<PopReport> kept;
      for (auto& r : tree->hhh(*s.percent / 100.0, c)) {
        if (dominated(r.key)) kept.push_back(std::move(r));
      }
      emit(kept, true);
      break;
    }
    case SelectKind::kAbove: {
      std::vector<PopReport> kept;
      for (auto& r : tree->above_t(*s.count, c)) {
        if (dominated(r.key)) kept.push_back(std::move(r));
      }
      emit(kept, false);
      break;
    }
    case SelectKind::kStar:
      emit(tree->subtree_query(pattern), false);
      break;
    case SelectKind::kHc:
      break;
  }
  out.done = true;
  return out;
}

bool row_before(const Row& a, const Row& b) {
  if (a.bin_start != b.bin_start) return a.bin_start < b.bin_start;
  if (a.site != b.site) return a.site < b.site;
  if (a.site_label != b.site_label) return a.site_label < b.site_label;
  if (a.score != b.score) return a.score > b.score;
  if (a.key.feature_set != b.key.feature_set) return a.key.feature_set < b.key.feature_set;
  return compare_lex(a.key, b.key) < 0;
}

}  // namespace

ResultTable execute(const Plan& plan, FlowDB& db, const ExecOptions& opts) {
  const auto t0 = Clock::now();
  const auto deadline = t0 + opts.timeout;
  ResultTable table;
  table.kind = plan.query.select.kind;
  table.counter = plan.query.select.counter;
  table.warnings = plan.warnings;

  std::vector<CellResult> cells(plan.units.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> expired{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.units.size()) return;
      if (Clock::now() > deadline) {
        expired = true;
        return;
      }
      cells[i] = evaluate_cell(plan, plan.units[i], db);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.workers, plan.units.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();
  }
  table.truncated = expired.load();
  if (table.truncated) table.warnings.push_back("query timed out; results are partial");

  // Cells are visited in plan order, so the first mini-query wins a
  // duplicate regardless of which worker finished first.
  std::set<std::tuple<std::uint64_t, std::uint32_t, std::string, std::uint8_t, std::string>> seen;
  for (auto& cell : cells) {
    table.trees_fetched += cell.fetched;
    table.merges += cell.merges;
    for (auto& row : cell.rows) {
      auto id = std::tuple{row.bin_start, row.site, row.site_label,
                           static_cast<std::uint8_t>(row.key.feature_set), to_string(row.key)};
      if (!seen.insert(std::move(id)).second) continue;
      table.rows.push_back(std::move(row));
    }
  }
  std::sort(table.rows.begin(), table.rows.end(), row_before);
  table.exec_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return table;
}

ResultTable run(std::string_view text, FlowDB& db, const ExecOptions& opts) {
  const auto t0 = Clock::now();
  const Plan p = plan(parse(text), db, opts.plan);
  const double plan_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  ResultTable t = execute(p, db, opts);
  t.plan_ms = plan_ms;
  return t;
}

}  // namespace flowtree::flowql
