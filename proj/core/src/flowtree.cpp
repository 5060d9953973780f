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

#include "flowtree/flowtree.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include "flowtree/errors.hpp"

namespace flowtree {
namespace {

constexpr Flowtree::NodeId kRoot = 0;
__extension__ using u128 = unsigned __int128;

// is_ancestor without the feature-set check, for keys of one tree.
bool dominates(const FeatureSet& fs, const FlowKey& a, const FlowKey& b) {
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (a.masks[i] > b.masks[i]) return false;
    if (prefix_of(b.values[i], a.masks[i], fs.width(i)) != a.values[i]) return false;
  }
  return true;
}

// Level-shaped key at level l to its ancestor shape at level l - 1.
void step_up(const FeatureSet& fs, FlowKey& k) {
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (k.masks[i] == 0) continue;
    --k.masks[i];
    k.values[i] = prefix_of(k.values[i], k.masks[i], fs.width(i));
  }
}

bool disjoint(const FeatureSet& fs, const FlowKey& a, const FlowKey& b) {
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const std::uint8_t m = std::min(a.masks[i], b.masks[i]);
    if (prefix_of(a.values[i], m, fs.width(i)) != prefix_of(b.values[i], m, fs.width(i))) {
      return true;
    }
  }
  return false;
}

std::uint64_t sat_mul2(std::uint64_t v) {
  return v > std::numeric_limits<std::uint64_t>::max() / 2 ? std::numeric_limits<std::uint64_t>::max()
                                                           : v * 2;
}

std::int64_t clamp_i64(std::uint64_t v) {
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  return static_cast<std::int64_t>(std::min(v, kMax));
}

PopCounters min_each(const PopCounters& a, const PopCounters& b) {
  return {std::min(a.flows, b.flows), std::min(a.packets, b.packets), std::min(a.bytes, b.bytes)};
}

std::uint32_t to_micros(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw InvalidArgument("insert probability must be in (0, 1], got " + std::to_string(p));
  }
  return static_cast<std::uint32_t>(std::max<long long>(1, std::llround(p * 1e6)));
}

// Deeper level first, then lexicographic key order.
bool tie_before(std::uint8_t level_a, const FlowKey& a, std::uint8_t level_b, const FlowKey& b) {
  if (level_a != level_b) return level_a > level_b;
  return compare_lex(a, b) < 0;
}

void sort_reports(std::vector<PopReport>& out) {
  std::sort(out.begin(), out.end(), [](const PopReport& a, const PopReport& b) {
    const auto la = *level_of(a.key), lb = *level_of(b.key);
    if (la != lb) return la < lb;
    return compare_lex(a.key, b.key) < 0;
  });
}

}  // namespace

Flowtree::Flowtree(FeatureSetId fs, const TreeOptions& opts)
    : fs_(fs),
      max_nodes_(opts.max_nodes),
      p_micros_(to_micros(opts.insert_probability)),
      seed_(opts.seed),
      rng_(opts.seed) {
  FeatureSet::get(fs);  // validates the id
  if (max_nodes_ < kMinMaxNodes) {
    throw InvalidArgument("max_nodes must be at least " + std::to_string(kMinMaxNodes));
  }
  allocate(FlowKey::root(fs), 0, {});
}

Flowtree Flowtree::build(std::span<const FlowRecord> flows, FeatureSetId fs,
                         const TreeOptions& opts) {
  Flowtree tree(fs, opts);
  for (const FlowRecord& f : flows) tree.add_flow(f);
  return tree;
}

std::optional<PopCounters> Flowtree::comp_pop(const FlowKey& key) const {
  const NodeId id = find(key);
  if (id == kNoNode) return std::nullopt;
  return nodes_[id].comp;
}

std::optional<FlowKey> Flowtree::parent_of(const FlowKey& key) const {
  const NodeId id = find(key);
  if (id == kNoNode || id == kRoot) return std::nullopt;
  return nodes_[nodes_[id].parent].key;
}

std::vector<FlowKey> Flowtree::children_of(const FlowKey& key) const {
  const NodeId id = find(key);
  if (id == kNoNode) throw KeyNotFound("no node " + to_string(key));
  std::vector<FlowKey> out;
  out.reserve(nodes_[id].children.size());
  for (NodeId c : nodes_[id].children) out.push_back(nodes_[c].key);
  std::sort(out.begin(), out.end(), [](const FlowKey& a, const FlowKey& b) {
    return compare_lex(a, b) < 0;
  });
  return out;
}

std::vector<std::pair<FlowKey, PopCounters>> Flowtree::entries() const {
  std::vector<std::pair<std::uint8_t, NodeId>> order;
  order.reserve(size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) order.emplace_back(nodes_[id].level, id);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return compare_lex(nodes_[a.second].key, nodes_[b.second].key) < 0;
  });
  std::vector<std::pair<FlowKey, PopCounters>> out;
  out.reserve(order.size());
  for (const auto& [level, id] : order) out.emplace_back(nodes_[id].key, nodes_[id].comp);
  return out;
}

Flowtree::NodeId Flowtree::find(const FlowKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? kNoNode : it->second;
}

Flowtree::NodeId Flowtree::nearest_ancestor(const FlowKey& key, int start_level) const {
  if (start_level <= 0) return kRoot;
  const FeatureSet& fs = FeatureSet::get(fs_);
  FlowKey up = truncate_to_level(key, static_cast<std::uint8_t>(start_level));
  for (int l = start_level; l > 0; --l) {
    if (const NodeId id = find(up); id != kNoNode) return id;
    step_up(fs, up);
  }
  return kRoot;
}

Flowtree::NodeId Flowtree::allocate(const FlowKey& key, std::uint8_t level,
                                    const PopCounters& comp) {
  NodeId id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    id = static_cast<NodeId>(nodes_.size());
    nodes_.emplace_back();
  }
  Node& n = nodes_[id];
  n.key = key;
  n.comp = comp;
  n.parent = kNoNode;
  n.level = level;
  n.live = true;
  n.children.clear();
  index_.emplace(key, id);
  return id;
}

void Flowtree::append_child(NodeId parent, NodeId child) {
  nodes_[child].parent = parent;
  nodes_[parent].children.push_back(child);
}

void Flowtree::unlink_child(NodeId parent, NodeId child) {
  auto& ch = nodes_[parent].children;
  auto it = std::find(ch.begin(), ch.end(), child);
  if (it != ch.end()) {
    *it = ch.back();
    ch.pop_back();
  }
}

Flowtree::NodeId Flowtree::insert_node(const FlowKey& key, std::uint8_t level,
                                       const PopCounters& comp) {
  return insert_under(nearest_ancestor(key, level - 1), key, level, comp);
}

Flowtree::NodeId Flowtree::insert_under(NodeId parent, const FlowKey& key, std::uint8_t level,
                                        const PopCounters& comp) {
  const NodeId id = allocate(key, level, comp);
  const FeatureSet& fs = FeatureSet::get(fs_);
  // Adopt the parent's children that now fall under the new node.
  auto& siblings = nodes_[parent].children;
  for (std::size_t i = 0; i < siblings.size();) {
    const NodeId c = siblings[i];
    if (dominates(fs, key, nodes_[c].key)) {
      siblings[i] = siblings.back();
      siblings.pop_back();
      append_child(id, c);
    } else {
      ++i;
    }
  }
  append_child(parent, id);
  return id;
}

void Flowtree::remove_node(NodeId id) {
  invalidate();
  Node& n = nodes_[id];
  const NodeId parent = n.parent;
  nodes_[parent].comp += n.comp;
  for (NodeId c : n.children) append_child(parent, c);
  unlink_child(parent, id);
  index_.erase(n.key);
  n.live = false;
  n.children.clear();
  n.comp = {};
  free_.push_back(id);
}

FlowKey Flowtree::validate_key(const FlowKey& raw) const {
  if (raw.feature_set != fs_) {
    throw FeatureSetMismatch("key of " + std::string(to_string(raw.feature_set)) +
                             " added to a " + std::string(to_string(fs_)) + " tree");
  }
  FlowKey key = canonicalize(raw);
  if (!level_of(key)) throw InvalidKey("key does not match a hierarchy level: " + to_string(key));
  return key;
}

bool Flowtree::coin_flip() { return rng_() % 1000000 < p_micros_; }

void Flowtree::add(const FlowKey& raw, const PopCounters& stats) {
  const FlowKey key = validate_key(raw);
  if (total_.would_overflow(stats)) throw CounterOverflow("tree total would overflow");
  invalidate();
  if (const NodeId id = find(key); id != kNoNode) {
    nodes_[id].comp += stats;
  } else {
    const FeatureSet& fs = FeatureSet::get(fs_);
    const std::uint8_t level = *level_of(key);
    // Walk up to the first existing ancestor, remembering the path.
    std::array<FlowKey, 33> path;
    int landing = 0;
    NodeId parent = kRoot;
    FlowKey up = key;
    for (int l = level - 1; l > 0; --l) {
      step_up(fs, up);
      path[l] = up;
      if (const NodeId id = find(up); id != kNoNode) {
        landing = l;
        parent = id;
        break;
      }
    }
    // Every level between the landing node and the leaf is vacant, so each
    // new node hangs directly under the landing node.
    insert_under(parent, key, level, stats);
    for (int l = level - 1; l > landing; --l) {
      if (coin_flip()) insert_under(parent, path[l], static_cast<std::uint8_t>(l), {});
    }
  }
  total_ += stats;
  if (size() > max_nodes_) prune_to(std::max<std::size_t>(1, max_nodes_ * 9ULL / 10));
}

void Flowtree::add_flow(const FlowRecord& flow) {
  add(key_from_flow(flow, fs_), PopCounters{1, flow.packets, flow.bytes});
}

void Flowtree::delete_node(const FlowKey& key) {
  const NodeId id = find(key);
  if (id == kNoNode) throw KeyNotFound("no node " + to_string(key));
  if (id == kRoot) throw RootDeletion("the root cannot be deleted");
  remove_node(id);
}

void Flowtree::bottom_up_order(std::vector<NodeId>& order) const {
  const std::uint8_t depth = FeatureSet::get(fs_).depth();
  std::array<std::size_t, 35> counts{};
  for (const Node& n : nodes_) {
    if (n.live) ++counts[depth - n.level + 1];
  }
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  order.resize(size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) order[counts[depth - nodes_[id].level]++] = id;
  }
}

std::vector<Flowtree::NodeId> Flowtree::bottom_up_order() const {
  std::vector<NodeId> order;
  bottom_up_order(order);
  return order;
}

void Flowtree::compute_pops(std::vector<PopCounters>& pops, std::vector<NodeId>& order) const {
  pops.assign(nodes_.size(), PopCounters{});
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) pops[id] = nodes_[id].comp;
  }
  bottom_up_order(order);
  for (NodeId id : order) {
    if (id != kRoot) pops[nodes_[id].parent] += pops[id];
  }
}

std::vector<PopCounters> Flowtree::compute_pops() const {
  std::vector<PopCounters> pops;
  std::vector<NodeId> order;
  compute_pops(pops, order);
  return pops;
}

const std::vector<PopCounters>& Flowtree::cached_pops() const {
  std::lock_guard lock(cache_.mu);
  if (!cache_.pops) cache_.pops = std::make_shared<const std::vector<PopCounters>>(compute_pops());
  return *cache_.pops;
}

PopReport Flowtree::report(NodeId id, const std::vector<PopCounters>& pops) const {
  return PopReport{nodes_[id].key, pops[id], nodes_[id].comp, pops[id], true, 0};
}

void Flowtree::compress(std::uint64_t thresh_comp_pop, std::uint64_t thresh_pop) {
  const auto pops = compute_pops();
  for (NodeId id : bottom_up_order()) {
    if (id == kRoot) continue;
    const Node& n = nodes_[id];
    if (n.comp.flows >= thresh_comp_pop) continue;
    if (n.children.empty() || pops[id].flows < thresh_pop) remove_node(id);
  }
}

void Flowtree::compress_to_capacity(std::size_t target) {
  if (target < kMinMaxNodes) {
    throw InvalidArgument("compress target must be at least " + std::to_string(kMinMaxNodes));
  }
  prune_to(target);
}

void Flowtree::prune_to(std::size_t target) {
  if (size() <= target) return;
  // Subtree popularities are invariant under deletions: pruned traffic
  // stays inside every surviving ancestor.
  Scratch& sc = scratch_;
  compute_pops(sc.pops, sc.order);
  const auto& pops = sc.pops;

  auto& comps = sc.comps;
  comps.clear();
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    if (nodes_[id].live) comps.push_back(nodes_[id].comp.flows);
  }
  const std::size_t need = size() - target;
  std::nth_element(comps.begin(), comps.begin() + (need - 1), comps.end());
  std::uint64_t thresh = comps[need - 1] == std::numeric_limits<std::uint64_t>::max()
                             ? comps[need - 1]
                             : comps[need - 1] + 1;

  using Candidate = Scratch::Candidate;
  // Smallest comp first, then deeper level, then key order.
  auto later = [this](const Candidate& a, const Candidate& b) {
    if (a.comp != b.comp) return a.comp > b.comp;
    return tie_before(b.level, nodes_[b.id].key, a.level, nodes_[a.id].key);
  };

  for (;;) {
    const std::uint64_t thresh_pop = sat_mul2(thresh);
    auto eligible = [&](NodeId id) {
      const Node& n = nodes_[id];
      if (!n.live || id == kRoot || n.comp.flows >= thresh) return false;
      return n.children.empty() || pops[id].flows < thresh_pop;
    };
    auto& heap = sc.heap;
    heap.clear();
    for (NodeId id = 1; id < nodes_.size(); ++id) {
      if (eligible(id)) heap.push_back({nodes_[id].comp.flows, nodes_[id].level, id});
    }
    std::make_heap(heap.begin(), heap.end(), later);
    auto push = [&](const Candidate& c) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), later);
    };
    while (size() > target && !heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), later);
      const Candidate c = heap.back();
      heap.pop_back();
      const Node& n = nodes_[c.id];
      if (!n.live) continue;
      if (n.comp.flows != c.comp) {
        if (eligible(c.id)) push({n.comp.flows, n.level, c.id});
        continue;
      }
      if (!eligible(c.id)) continue;
      const NodeId parent = n.parent;
      remove_node(c.id);
      if (eligible(parent)) push({nodes_[parent].comp.flows, nodes_[parent].level, parent});
    }
    if (size() <= target || thresh == std::numeric_limits<std::uint64_t>::max()) break;
    thresh = sat_mul2(thresh);
  }
}

void Flowtree::rescale(std::uint64_t num, std::uint64_t den) {
  if (num == 0 || den == 0) throw InvalidArgument("rescale factor must be positive");
  auto scale = [&](std::uint64_t v) {
    const u128 r = (static_cast<u128>(v) * num * 2 + den) / (static_cast<u128>(den) * 2);
    if (r > std::numeric_limits<std::uint64_t>::max()) throw CounterOverflow("rescale overflow");
    return static_cast<std::uint64_t>(r);
  };
  PopCounters total;
  std::vector<PopCounters> scaled(nodes_.size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].live) continue;
    const PopCounters& c = nodes_[id].comp;
    scaled[id] = {scale(c.flows), scale(c.packets), scale(c.bytes)};
    if (!total.add_checked(scaled[id])) throw CounterOverflow("rescale overflow");
  }
  invalidate();
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) nodes_[id].comp = scaled[id];
  }
  total_ = total;
}

std::unordered_map<FlowKey, PopReport, FlowKeyHash> Flowtree::stats() const {
  const auto& pops = cached_pops();
  std::unordered_map<FlowKey, PopReport, FlowKeyHash> out;
  out.reserve(size());
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) out.emplace(nodes_[id].key, report(id, pops));
  }
  return out;
}

PopReport Flowtree::query(const FlowKey& raw) const {
  if (raw.feature_set != fs_) throw FeatureSetMismatch("query key of another feature set");
  const FlowKey key = canonicalize(raw);
  const FeatureSet& fs = FeatureSet::get(fs_);
  const auto& pops = cached_pops();
  if (const NodeId id = find(key); id != kNoNode) return report(id, pops);

  const NodeId p = nearest_ancestor(key, deepest_covering_level(key));
  // Children of p split into those inside the key (C_f), those outside it
  // (C_o) and, for keys that are not level-shaped, partial overlaps whose
  // own share cannot be attributed and whose subtrees are split further.
  PopCounters inside, outside, partial = nodes_[p].comp;
  std::vector<NodeId> stack(nodes_[p].children.begin(), nodes_[p].children.end());
  while (!stack.empty()) {
    const NodeId c = stack.back();
    stack.pop_back();
    const Node& n = nodes_[c];
    if (disjoint(fs, key, n.key)) {
      outside += pops[c];
    } else if (dominates(fs, key, n.key)) {
      inside += pops[c];
    } else {
      partial += n.comp;
      stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
  }
  const PopCounters from_parent = pops[p] - outside;
  const PopCounters from_children = partial + inside;
  return PopReport{key, min_each(from_parent, from_children), {}, inside, false, 0};
}

std::vector<PopReport> Flowtree::subtree_query(const FlowKey& raw) const {
  if (raw.feature_set != fs_) throw FeatureSetMismatch("pattern of another feature set");
  const FlowKey pattern = canonicalize(raw);
  const FeatureSet& fs = FeatureSet::get(fs_);
  const auto& pops = cached_pops();
  std::vector<PopReport> out;
  std::vector<NodeId> stack{nearest_ancestor(pattern, deepest_covering_level(pattern))};
  if (const NodeId exact = find(pattern); exact != kNoNode) stack = {exact};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = nodes_[id];
    if (dominates(fs, pattern, n.key)) out.push_back(report(id, pops));
    for (NodeId c : n.children) {
      if (!disjoint(fs, pattern, nodes_[c].key)) stack.push_back(c);
    }
  }
  sort_reports(out);
  return out;
}

std::vector<PopReport> Flowtree::drill_down(const FlowKey& key) const {
  const NodeId id = find(key);
  if (id == kNoNode) throw KeyNotFound("no node " + to_string(key));
  const auto& pops = cached_pops();
  std::vector<PopReport> out;
  for (NodeId c : nodes_[id].children) out.push_back(report(c, pops));
  sort_reports(out);
  return out;
}

std::vector<PopReport> Flowtree::above_t(std::uint64_t t, Counter c) const {
  const auto& pops = cached_pops();
  std::vector<PopReport> out;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live && pops[id].get(c) > t) out.push_back(report(id, pops));
  }
  sort_reports(out);
  return out;
}

std::vector<PopReport> Flowtree::top_k(std::size_t k, Counter c,
                                       const KeyFilter& candidates) const {
  if (k == 0) throw InvalidArgument("top-k needs k >= 1");
  const auto& pops = cached_pops();
  std::vector<std::int64_t> work(nodes_.size(), 0);
  std::vector<char> eligible(nodes_.size(), 0);
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].live) continue;
    work[id] = clamp_i64(pops[id].get(c));
    eligible[id] = !candidates || candidates(nodes_[id].key);
  }

  struct Entry {
    std::int64_t value;
    NodeId id;
  };
  auto lower = [this](const Entry& a, const Entry& b) {
    if (a.value != b.value) return a.value < b.value;
    return tie_before(nodes_[b.id].level, nodes_[b.id].key, nodes_[a.id].level, nodes_[a.id].key);
  };
  std::vector<Entry> storage;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (eligible[id]) storage.push_back({work[id], id});
  }
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower)> heap(lower, std::move(storage));

  std::vector<PopReport> out;
  while (out.size() < k && !heap.empty()) {
    const Entry e = heap.top();
    heap.pop();
    if (!eligible[e.id] || work[e.id] != e.value) continue;
    eligible[e.id] = 0;
    PopReport r = report(e.id, pops);
    r.score = e.value;
    out.push_back(r);
    for (NodeId a = nodes_[e.id].parent; a != kNoNode; a = nodes_[a].parent) {
      work[a] -= e.value;
      if (eligible[a]) heap.push({work[a], a});
    }
  }
  return out;
}

std::vector<PopReport> Flowtree::hhh(double phi, Counter c) const {
  if (!(phi > 0.0 && phi < 1.0)) throw InvalidArgument("hhh fraction must be in (0, 1)");
  const auto& pops = cached_pops();
  const long double threshold = static_cast<long double>(phi) * total_.get(c);
  std::vector<std::uint64_t> residual(nodes_.size(), 0);
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].live) residual[id] = nodes_[id].comp.get(c);
  }
  std::vector<PopReport> out;
  for (NodeId id : bottom_up_order()) {
    if (static_cast<long double>(residual[id]) > threshold) {
      PopReport r = report(id, pops);
      r.score = clamp_i64(residual[id]);
      out.push_back(r);
    } else if (id != kRoot) {
      residual[nodes_[id].parent] += residual[id];
    }
  }
  std::sort(out.begin(), out.end(), [](const PopReport& a, const PopReport& b) {
    if (a.score != b.score) return a.score > b.score;
    return tie_before(*level_of(a.key), a.key, *level_of(b.key), b.key);
  });
  return out;
}

Flowtree Flowtree::build_from_sums(FeatureSetId fs, const TreeOptions& opts,
                                   std::unordered_map<FlowKey, PopCounters, FlowKeyHash> sums) {
  std::vector<std::pair<FlowKey, PopCounters>> entries(sums.begin(), sums.end());
  return from_entries(fs, opts, std::move(entries));
}

Flowtree Flowtree::from_entries(FeatureSetId fs, const TreeOptions& opts,
                                std::vector<std::pair<FlowKey, PopCounters>> entries) {
  Flowtree tree(fs, opts);
  std::vector<std::pair<std::uint8_t, std::size_t>> order;
  order.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const FlowKey& k = entries[i].first;
    if (k.feature_set != fs) throw FeatureSetMismatch("entry of another feature set");
    if (!is_canonical(k)) throw InvalidKey("non-canonical key " + to_string(k));
    auto level = level_of(k);
    if (!level) throw InvalidKey("key does not match a hierarchy level: " + to_string(k));
    order.emplace_back(*level, i);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return compare_lex(entries[a.second].first, entries[b.second].first) < 0;
  });
  tree.nodes_.reserve(entries.size() + 1);
  tree.index_.reserve(entries.size() + 1);
  PopCounters total;
  bool root_seen = false;
  for (const auto& [level, i] : order) {
    const auto& [key, comp] = entries[i];
    if (!total.add_checked(comp)) throw CounterOverflow("tree total would overflow");
    if (level == 0) {
      if (root_seen) throw InvalidKey("duplicate root");
      root_seen = true;
      tree.nodes_[kRoot].comp = comp;
      tree.invalidate();
      continue;
    }
    if (tree.find(key) != kNoNode) throw InvalidKey("duplicate key " + to_string(key));
    // Parents precede children in this order, so no re-parenting is needed.
    const NodeId parent = tree.nearest_ancestor(key, level - 1);
    const NodeId id = tree.allocate(key, level, comp);
    tree.append_child(parent, id);
  }
  tree.total_ = total;
  return tree;
}

Flowtree Flowtree::merge(const Flowtree& a, const Flowtree& b) {
  const Flowtree* trees[] = {&a, &b};
  return merge_all(trees);
}

Flowtree Flowtree::merge_all(std::span<const Flowtree* const> trees, const MergeOptions& opts) {
  if (trees.empty()) throw InvalidArgument("merge needs at least one tree");
  const FeatureSetId fs = trees.front()->feature_set();
  std::uint32_t max_nodes = 0;
  PopCounters total;
  std::size_t node_bound = 0;
  for (const Flowtree* t : trees) {
    if (t->feature_set() != fs) throw FeatureSetMismatch("merge across feature sets");
    max_nodes = std::max(max_nodes, t->max_nodes());
    if (!total.add_checked(t->total())) throw CounterOverflow("merged total would overflow");
    node_bound += t->size();
  }
  using Sums = std::unordered_map<FlowKey, PopCounters, FlowKeyHash>;
  auto accumulate = [](std::span<const Flowtree* const> part, Sums& sums) {
    for (const Flowtree* t : part) {
      for (const Node& n : t->nodes_) {
        if (n.live) sums[n.key] += n.comp;
      }
    }
  };

  Sums sums;
  const std::size_t workers = std::max<std::size_t>(1, opts.workers);
  if (workers > 1 && trees.size() >= 2 * workers) {
    const std::size_t chunk = (trees.size() + workers - 1) / workers;
    std::vector<std::future<Sums>> parts;
    for (std::size_t begin = 0; begin < trees.size(); begin += chunk) {
      auto part = trees.subspan(begin, std::min(chunk, trees.size() - begin));
      parts.push_back(std::async(std::launch::async, [part, &accumulate] {
        Sums s;
        accumulate(part, s);
        return s;
      }));
    }
    for (auto& f : parts) {
      for (const auto& [k, v] : f.get()) sums[k] += v;
    }
  } else {
    sums.reserve(std::min<std::size_t>(node_bound, 1 << 22));
    accumulate(trees, sums);
  }

  TreeOptions o{opts.max_nodes.value_or(max_nodes), trees.front()->insert_probability(),
                trees.front()->seed()};
  Flowtree out = build_from_sums(fs, o, std::move(sums));
  out.p_micros_ = trees.front()->p_micros_;
  if (opts.compress && out.size() > out.max_nodes_) out.prune_to(out.max_nodes_);
  return out;
}

Flowtree Flowtree::diff(const Flowtree& a, const Flowtree& b) {
  if (a.feature_set() != b.feature_set()) throw FeatureSetMismatch("diff across feature sets");
  // Merged counter m = a + b; for every key of b the result is |m - 2b|,
  // which equals |a - b| (keys only in a keep a).
  std::unordered_map<FlowKey, std::pair<PopCounters, PopCounters>, FlowKeyHash> both;
  both.reserve(a.size() + b.size());
  for (const Node& n : a.nodes_) {
    if (n.live) both[n.key].first = n.comp;
  }
  for (const Node& n : b.nodes_) {
    if (n.live) both[n.key].second = n.comp;
  }
  std::vector<std::pair<FlowKey, PopCounters>> entries;
  entries.reserve(both.size());
  for (const auto& [key, v] : both) entries.emplace_back(key, abs_diff(v.first, v.second));
  TreeOptions o{std::max(a.max_nodes(), b.max_nodes()), a.insert_probability(), a.seed()};
  Flowtree out = from_entries(a.feature_set(), o, std::move(entries));
  out.p_micros_ = a.p_micros_;
  if (out.size() > out.max_nodes_) out.prune_to(out.max_nodes_);
  return out;
}

std::vector<PopReport> Flowtree::heavy_changers(const Flowtree& a, const Flowtree& b,
                                                std::size_t k, Counter c,
                                                const KeyFilter& candidates) {
  return diff(a, b).top_k(k, c, candidates);
}

void Flowtree::check_invariants() const {
  auto fail = [](const std::string& what) { throw std::logic_error("flowtree invariant: " + what); };
  if (nodes_.empty() || !nodes_[kRoot].live || !nodes_[kRoot].key.is_root()) fail("root missing");
  std::size_t live = 0;
  PopCounters sum;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (!n.live) continue;
    ++live;
    sum += n.comp;
    if (find(n.key) != id) fail("index does not map " + to_string(n.key));
    if (!is_canonical(n.key)) fail("non-canonical key " + to_string(n.key));
    auto level = level_of(n.key);
    if (!level || *level != n.level) fail("bad level for " + to_string(n.key));
    for (NodeId c : n.children) {
      if (!nodes_[c].live || nodes_[c].parent != id) fail("child link of " + to_string(n.key));
    }
    if (id == kRoot) continue;
    if (n.parent == kNoNode || !nodes_[n.parent].live) fail("dangling parent");
    if (nearest_ancestor(n.key, n.level - 1) != n.parent) {
      fail("parent of " + to_string(n.key) + " is not its nearest ancestor");
    }
    const auto& ch = nodes_[n.parent].children;
    if (std::count(ch.begin(), ch.end(), id) != 1) fail("parent does not list child");
  }
  if (live != index_.size()) fail("index size mismatch");
  if (!(sum == total_)) fail("sum of comp_pop differs from total");
}

}  // namespace flowtree
