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

// Bounded-size self-adjusting hierarchical heavy-hitter tree.
//
// Every node stores its complementary popularity (comp_pop): the traffic of
// its region that is not covered by any of its current children. The full
// popularity of a node is its comp_pop plus the popularity of its children.
// Pruning a node pushes its comp_pop into its tree parent, so the sum of all
// comp_pops always equals the inserted total.
//
// Tree nodes are always level-shaped keys (see hierarchy.hpp). The tree
// parent of a node is its nearest existing ancestor.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "flowtree/counters.hpp"
#include "flowtree/flow_record.hpp"
#include "flowtree/hierarchy.hpp"

namespace flowtree {

inline constexpr std::uint32_t kDefaultMaxNodes = 40000;
inline constexpr std::uint32_t kMinMaxNodes = 16;
inline constexpr double kDefaultInsertProbability = 0.3;

struct TreeOptions {
  std::uint32_t max_nodes = kDefaultMaxNodes;
  /// Probability of materializing each intermediate ancestor on add.
  double insert_probability = kDefaultInsertProbability;
  std::uint64_t seed = 0;
};

struct PopReport {
  FlowKey key;
  /// Full subtree popularity; an estimate when `exact` is false.
  PopCounters pop;
  /// The node's own share; zero when the key is not a tree node.
  PopCounters comp_pop;
  /// Guaranteed lower bound on the true popularity.
  PopCounters lower;
  bool exact = true;
  /// Ranking value of the producing operator (adjusted popularity for
  /// top-k, residual count for HHH); zero otherwise.
  std::int64_t score = 0;
};

using KeyFilter = std::function<bool(const FlowKey&)>;

struct MergeOptions {
  /// Compress the result to `max_nodes` (default: the largest input cap).
  bool compress = true;
  std::optional<std::uint32_t> max_nodes;
  /// Accumulate inputs in parallel chunks when > 1.
  std::size_t workers = 1;
};

class Flowtree {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kNoNode = ~NodeId{0};

  explicit Flowtree(FeatureSetId fs, const TreeOptions& opts = {});

  /// Summarizes `flows`: one flow, the record's packets and bytes per leaf.
  static Flowtree build(std::span<const FlowRecord> flows, FeatureSetId fs,
                        const TreeOptions& opts = {});

  /// Tree over exactly the given keys, parents rebuilt from the key set.
  /// The root is added when absent. Throws InvalidKey on duplicate,
  /// non-canonical or non-level-shaped keys.
  static Flowtree from_entries(FeatureSetId fs, const TreeOptions& opts,
                               std::vector<std::pair<FlowKey, PopCounters>> entries);

  FeatureSetId feature_set() const { return fs_; }
  std::uint32_t max_nodes() const { return max_nodes_; }
  double insert_probability() const { return p_micros_ / 1e6; }
  std::uint32_t insert_probability_micros() const { return p_micros_; }
  std::uint64_t seed() const { return seed_; }
  TreeOptions options() const { return {max_nodes_, insert_probability(), seed_}; }

  std::size_t size() const { return index_.size(); }
  const PopCounters& total() const { return total_; }

  bool contains(const FlowKey& key) const { return index_.count(key) != 0; }
  std::optional<PopCounters> comp_pop(const FlowKey& key) const;
  std::optional<FlowKey> parent_of(const FlowKey& key) const;
  std::vector<FlowKey> children_of(const FlowKey& key) const;

  /// All (key, comp_pop) pairs sorted by level, then key.
  std::vector<std::pair<FlowKey, PopCounters>> entries() const;

  /// Inserts or updates `key` (canonicalized; must be level-shaped, else
  /// InvalidKey), materializing each missing intermediate
  /// ancestor with the tree's insert probability, then compresses to 90% of
  /// max_nodes if the cap is exceeded.
  void add(const FlowKey& key, const PopCounters& stats);
  void add_flow(const FlowRecord& flow);

  /// Pushes the node's comp_pop into its parent and re-parents its children.
  void delete_node(const FlowKey& key);

  /// Deletes, bottom-up, every leaf with comp_pop.flows < thresh_comp_pop
  /// and every interior node with comp_pop.flows < thresh_comp_pop and
  /// pop.flows < thresh_pop.
  void compress(std::uint64_t thresh_comp_pop, std::uint64_t thresh_pop);

  /// Prunes until at most `target` nodes remain.
  void compress_to_capacity(std::size_t target);

  /// Multiplies every comp_pop by num/den, rounding half up.
  void rescale(std::uint64_t num, std::uint64_t den);

  std::unordered_map<FlowKey, PopReport, FlowKeyHash> stats() const;

  /// Exact report for tree nodes, otherwise an estimate derived from the
  /// nearest existing ancestor and its children.
  PopReport query(const FlowKey& key) const;
  /// Every node dominated by `pattern`, sorted by level then key.
  std::vector<PopReport> subtree_query(const FlowKey& pattern) const;
  /// Direct tree children of `key`. Throws KeyNotFound.
  std::vector<PopReport> drill_down(const FlowKey& key) const;
  /// Nodes with pop above `t` (strict), sorted by level then key.
  std::vector<PopReport> above_t(std::uint64_t t, Counter c = Counter::kFlows) const;
  /// Repeatedly extracts the node with the largest working popularity and
  /// subtracts it from every ancestor. Ties: deeper first, then key order.
  /// Only nodes accepted by `candidates` are extracted.
  std::vector<PopReport> top_k(std::size_t k, Counter c = Counter::kFlows,
                               const KeyFilter& candidates = {}) const;
  /// Nodes whose residual count (excluding HHH descendants) exceeds
  /// phi * total. Sorted by residual desc, then level desc, then key.
  std::vector<PopReport> hhh(double phi, Counter c = Counter::kFlows) const;

  static Flowtree merge(const Flowtree& a, const Flowtree& b);
  static Flowtree merge_all(std::span<const Flowtree* const> trees,
                            const MergeOptions& opts = {});
  /// Union of both trees with every counter replaced by |a(n) - b(n)|.
  static Flowtree diff(const Flowtree& a, const Flowtree& b);
  static std::vector<PopReport> heavy_changers(const Flowtree& a, const Flowtree& b,
                                               std::size_t k, Counter c = Counter::kFlows,
                                               const KeyFilter& candidates = {});

  /// Throws std::logic_error describing the first violated structural
  /// invariant. Linear in node count times depth.
  void check_invariants() const;

 private:
  struct Node {
    FlowKey key;
    PopCounters comp;
    NodeId parent = kNoNode;
    std::uint8_t level = 0;
    bool live = false;
    std::vector<NodeId> children;
  };

  NodeId find(const FlowKey& key) const;
  NodeId nearest_ancestor(const FlowKey& key, int start_level) const;
  NodeId allocate(const FlowKey& key, std::uint8_t level, const PopCounters& comp);
  NodeId insert_node(const FlowKey& key, std::uint8_t level, const PopCounters& comp);
  /// Inserts below `parent`, which must be the key's nearest existing ancestor.
  NodeId insert_under(NodeId parent, const FlowKey& key, std::uint8_t level, const PopCounters& comp);
  void append_child(NodeId parent, NodeId child);
  void unlink_child(NodeId parent, NodeId child);
  void remove_node(NodeId id);
  /// Node ids grouped so that every node precedes its parent.
  std::vector<NodeId> bottom_up_order() const;
  void bottom_up_order(std::vector<NodeId>& order) const;
  std::vector<PopCounters> compute_pops() const;
  void compute_pops(std::vector<PopCounters>& pops, std::vector<NodeId>& order) const;
  /// Memoized compute_pops for read paths; safe for concurrent readers.
  const std::vector<PopCounters>& cached_pops() const;
  void invalidate() { cache_.pops.reset(); }
  PopReport report(NodeId id, const std::vector<PopCounters>& pops) const;
  void prune_to(std::size_t target);
  FlowKey validate_key(const FlowKey& raw) const;
  bool coin_flip();
  static Flowtree build_from_sums(FeatureSetId fs, const TreeOptions& opts,
                                  std::unordered_map<FlowKey, PopCounters, FlowKeyHash> sums);

  FeatureSetId fs_;
  std::uint32_t max_nodes_;
  std::uint32_t p_micros_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  PopCounters total_;
  std::vector<Node> nodes_;
  std::vector<NodeId> free_;
  absl::flat_hash_map<FlowKey, NodeId, FlowKeyHash> index_;

  // Copies start with an empty cache.
  struct PopCache {
    std::mutex mu;
    std::shared_ptr<const std::vector<PopCounters>> pops;
    PopCache() = default;
    PopCache(const PopCache&) {}
    PopCache& operator=(const PopCache&) {
      pops.reset();
      return *this;
    }
  };
  mutable PopCache cache_;

  // Reusable buffers of the auto-prune path; never copied.
  struct Scratch {
    struct Candidate {
      std::uint64_t comp;
      std::uint8_t level;
      NodeId id;
    };
    std::vector<PopCounters> pops;
    std::vector<NodeId> order;
    std::vector<std::uint64_t> comps;
    std::vector<Candidate> heap;
    Scratch() = default;
    Scratch(const Scratch&) {}
    Scratch& operator=(const Scratch&) { return *this; }
  };
  Scratch scratch_;
};

}  // namespace flowtree
