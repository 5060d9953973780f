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
// The query benchmark suite: ten templates, one per analysis task, each
// parameterized by a date and a site scope only.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowtree/flowql/execute.hpp"
#include "flowtree/tree_key.hpp"

namespace flowtree {
class FlowDB;
}

namespace flowtree::service {

struct BenchTemplate {
  std::string name;
  std::string task;
  /// FlowQL text with `{date}` (YYYY-MM-DD) and `{site}` placeholders.
  std::string text;
  /// Expands into many per-bin or per-site cells.
  bool iterator_heavy = false;
};

const std::vector<BenchTemplate>& benchmark_suite();

/// Substitutes every placeholder; `site` is a site_id value such as ANY,
/// ITR or 7.
std::string instantiate(const BenchTemplate& t, std::string_view date, std::string_view site);

struct BenchOptions {
  /// Empty picks the first day of the stored time span.
  std::string date;
  std::string site = "ANY";
  std::size_t repetitions = 10;
  /// Finest-to-coarsest caps applied to planning; one run per entry.
  std::vector<Granularity> modes{Granularity::k1d, Granularity::k15m};
  bool cold = true;
  bool hot = true;
  /// Restrict to these template names when non-empty.
  std::vector<std::string> only;
  flowql::ExecOptions exec;
};

struct BenchResult {
  std::string name;
  Granularity mode = Granularity::k1d;
  bool cold = false;
  bool iterator_heavy = false;
  std::size_t repetitions = 0;
  double min_ms = 0;
  double median_ms = 0;
  double max_ms = 0;
  std::size_t rows = 0;
  std::size_t trees = 0;
};

/// Cold runs empty the tree cache before every repetition; hot runs warm it
/// once first. Throws InvalidArgument on an empty store or unknown names.
std::vector<BenchResult> run_bench(FlowDB& db, const BenchOptions& opts);

/// One line per result plus a header; hot/cold speedup lines follow as
/// `# speedup` comments.
std::string bench_csv(const std::vector<BenchResult>& results);

}  // namespace flowtree::service
