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

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flowtree/counters.hpp"
#include "flowtree/flowql/plan.hpp"

namespace flowtree {
class FlowDB;
}

namespace flowtree::flowql {

struct Row {
  std::uint64_t bin_start = 0;
  std::uint64_t bin_end = 0;
  /// kAllSites for unrestricted or multi-site scopes.
  std::uint32_t site = kAllSites;
  std::string site_label;
  FlowKey key;
  PopCounters counters;
  bool exact = true;
  /// Part of the cell's span had no stored tree.
  bool partial = false;
  /// Ranking value: residual for hhh, the selected counter otherwise.
  std::int64_t score = 0;
  std::size_t mini = 0;
};

struct ResultTable {
  SelectKind kind = SelectKind::kPop;
  Counter counter = Counter::kFlows;
  std::vector<Row> rows;
  std::vector<std::string> warnings;
  /// The deadline passed before every cell was evaluated.
  bool truncated = false;
  double plan_ms = 0;
  double exec_ms = 0;
  std::size_t trees_fetched = 0;
  std::size_t merges = 0;
};

struct ExecOptions {
  std::chrono::milliseconds timeout{60000};
  std::size_t workers = 1;
  PlanOptions plan;
};

/// Evaluates every cell of the plan. Rows of overlapping mini-queries are
/// deduplicated by (bin, site, key), keeping the first mini-query's row.
/// Rows are sorted by bin, site, score descending, then key.
ResultTable execute(const Plan& plan, FlowDB& db, const ExecOptions& opts = {});

/// parse + plan + execute.
ResultTable run(std::string_view text, FlowDB& db, const ExecOptions& opts = {});

}  // namespace flowtree::flowql
