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

// From a parsed query to concrete work: DNF normalization into
// mini-queries, feature-set selection, and the list of stored trees each
// output cell is built from.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flowtree/flowql/ast.hpp"
#include "flowtree/hierarchy.hpp"
#include "flowtree/tree_key.hpp"

namespace flowtree {
class FlowDB;
}

namespace flowtree::flowql {

/// Sorted, duplicate-free list of atoms read as their conjunction.
using Conjunction = std::vector<Atom>;

inline constexpr std::size_t kMaxConjunctions = 1024;

/// Equivalent disjunctive normal form. Atoms are treated as opaque
/// propositions: duplicate conjunctions and conjunctions that are supersets
/// of another (absorption) are removed. Throws SemanticError past `limit`.
std::vector<Conjunction> to_dnf(const Expr& where, std::size_t limit = kMaxConjunctions);

/// Truth value of `e` under an assignment of its atoms.
bool evaluate(const Expr& e, const std::function<bool(const Atom&)>& truth);
bool evaluate(const std::vector<Conjunction>& dnf, const std::function<bool(const Atom&)>& truth);

/// Closed interval of site ids, optionally iterated one site at a time.
struct SiteScope {
  bool iterate = false;
  std::uint32_t lo = 0;
  std::uint32_t hi = kAllSites - 1;

  bool unrestricted() const { return lo == 0 && hi == kAllSites - 1; }
  friend bool operator==(const SiteScope&, const SiteScope&) = default;
};

struct MiniQuery {
  FeatureSetId feature_set = FeatureSetId::kSI;
  /// Intersection of the conjunction's feature constraints.
  FlowKey key;
  SiteScope sites;
  Conjunction atoms;

  friend bool operator==(const MiniQuery& a, const MiniQuery& b) {
    return a.feature_set == b.feature_set && a.key == b.key && a.sites == b.sites;
  }
};

/// Intersects the atoms of a conjunction; nullopt when no flow can satisfy
/// it. The feature set is the smallest one holding every mentioned feature
/// (SI when none is mentioned). Throws SemanticError for proto constraints.
std::optional<MiniQuery> resolve(const Conjunction& c);

/// Trees merged into one input tree. `partial` marks a time span not fully
/// covered by stored trees.
struct FetchList {
  std::vector<TreeKey> keys;
  bool partial = false;
};

/// One output cell: a mini-query evaluated for one site scope and one bin.
/// hc units have two inputs, every other kind has one.
struct Unit {
  std::size_t mini = 0;
  /// Site id, or kAllSites for an unrestricted scope.
  std::uint32_t site = kAllSites;
  std::string site_label;
  std::uint64_t bin_start = 0;
  std::uint64_t bin_end = 0;
  std::vector<FetchList> inputs;
};

struct Plan {
  Query query;
  std::vector<MiniQuery> minis;
  std::vector<Unit> units;
  std::vector<std::string> warnings;
};

struct PlanOptions {
  /// Coarsest granularity a cover may use; unset means any stored one.
  std::optional<Granularity> max_granularity;
};

/// Resolves every mini-query against the store inventory. Non-drill-down
/// ranges are tiled with the coarsest stored trees; drill-down bins are each
/// tiled the same way, so a missing bin width is synthesized by merging
/// finer trees. An unrestricted, non-iterated site scope uses all-sites
/// rollups when they tile the span, else merges the per-site trees.
Plan plan(const Query& q, const FlowDB& db, const PlanOptions& opts = {});

/// Human-readable plan: mini-queries, feature sets, fetched keys and merge
/// fan-in.
std::string explain(const Plan& p);

}  // namespace flowtree::flowql
