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

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "flowtree/errors.hpp"
#include "flowtree/flowtree.hpp"
#include "support/oracle.hpp"
#include "support/streams.hpp"

using namespace flowtree;

namespace {

FlowKey si(const char* text) { return parse_key(FeatureSetId::kSI, text); }

PopCounters flows(std::uint64_t n) { return {n, n, n}; }

TreeOptions exact_opts(std::uint32_t max_nodes = 1u << 22) { return {max_nodes, 1.0, 7}; }

PopCounters comp_sum(const Flowtree& t) {
  PopCounters s;
  for (const auto& [k, c] : t.entries()) s += c;
  return s;
}

PopCounters input_sum(const std::vector<FlowRecord>& fl) {
  PopCounters s;
  for (const auto& r : fl) s += PopCounters{1, r.packets, r.bytes};
  return s;
}

std::map<FlowKey, PopCounters, oracle::LexLess> as_map(const Flowtree& t) {
  std::map<FlowKey, PopCounters, oracle::LexLess> m;
  for (const auto& [k, c] : t.entries()) m[k] = c;
  return m;
}

// Quadratic top-k over an arbitrary tree's node set.
std::vector<std::pair<FlowKey, std::int64_t>> reference_top(const Flowtree& t, std::size_t k) {
  std::vector<oracle::Ranked> work;
  for (const auto& [key, r] : t.stats()) work.push_back({key, static_cast<std::int64_t>(r.pop.flows)});
  std::vector<char> taken(work.size(), 0);
  std::vector<std::pair<FlowKey, std::int64_t>> out;
  while (out.size() < k && out.size() < work.size()) {
    std::size_t best = work.size();
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (!taken[i] && (best == work.size() || oracle::ranks_before(work[i], work[best]))) best = i;
    }
    taken[best] = 1;
    out.emplace_back(work[best].key, work[best].value);
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (i != best && oracle::contains(work[i].key, work[best].key)) work[i].value -= work[best].value;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("construction validates options") {
  CHECK_THROWS_AS(Flowtree(FeatureSetId::kSI, {15, 0.3, 0}), InvalidArgument);
  CHECK_THROWS_AS(Flowtree(FeatureSetId::kSI, {100, 0.0, 0}), InvalidArgument);
  CHECK_THROWS_AS(Flowtree(FeatureSetId::kSI, {100, 1.5, 0}), InvalidArgument);
  Flowtree t(FeatureSetId::kSI);
  CHECK(t.size() == 1);
  CHECK(t.insert_probability() == doctest::Approx(0.3));
  CHECK(t.max_nodes() == 40000);
}

TEST_CASE("build aggregates identical flows") {
  FlowRecord r;
  r.dst_ip = *parse_ipv4("5.6.7.8");
  r.dst_port = 80;
  r.packets = 2;
  r.bytes = 100;
  std::vector<FlowRecord> fl(3, r);
  const Flowtree t = Flowtree::build(fl, FeatureSetId::kDIDP, {100, 0.3, 1});
  const FlowKey leaf = key_from_flow(r, FeatureSetId::kDIDP);
  REQUIRE(t.comp_pop(leaf));
  CHECK(t.comp_pop(leaf)->flows == 3);
  CHECK(t.comp_pop(leaf)->packets == 6);
  CHECK(t.query(FlowKey::root(FeatureSetId::kDIDP)).pop.flows == 3);
  t.check_invariants();
}

TEST_CASE("empty stream yields a root-only tree") {
  const Flowtree t = Flowtree::build({}, FeatureSetId::kSI);
  CHECK(t.size() == 1);
  CHECK(t.total().is_zero());
}

TEST_CASE("cap is enforced for uniform random flows") {
  std::mt19937_64 rng(3);
  std::vector<FlowRecord> fl(10000);
  for (auto& r : fl) {
    r.src_ip = static_cast<std::uint32_t>(rng());
    r.packets = r.bytes = 1;
  }
  Flowtree t(FeatureSetId::kSI, {100, 0.3, 1});
  for (const auto& r : fl) {
    t.add_flow(r);
    REQUIRE(t.size() <= 100);
  }
  CHECK(t.query(FlowKey::root(FeatureSetId::kSI)).pop.flows == 10000);
  CHECK(comp_sum(t) == t.total());
  t.check_invariants();
}

TEST_CASE("add semantics") {
  SUBCASE("first add creates the key plus sampled ancestors") {
    Flowtree t(FeatureSetId::kSI, {100, 0.3, 11});
    const auto k = si("src_ip=1.2.3.4|32");
    t.add(k, flows(1));
    CHECK(t.contains(k));
    CHECK(t.total().flows == 1);
    CHECK(t.size() >= 2);
    CHECK(t.size() <= 33);
    t.check_invariants();
  }
  SUBCASE("adding an existing key only increments its counter") {
    Flowtree t(FeatureSetId::kSI, {100, 0.3, 11});
    const auto k = si("src_ip=1.2.3.4|32");
    t.add(k, flows(1));
    const auto n = t.size();
    t.add(k, flows(1));
    CHECK(t.size() == n);
    CHECK(t.comp_pop(k)->flows == 2);
  }
  SUBCASE("p = 1 materializes the full chain") {
    for (const char* text : {"src_ip=1.2.3.4|32", "src_ip=1.2.0.0|16", "src_ip=128.0.0.0|1"}) {
      Flowtree t(FeatureSetId::kSI, exact_opts());
      const auto k = si(text);
      t.add(k, flows(1));
      // Leaf plus d - 1 intermediates plus the root.
      CHECK(t.size() == *level_of(k) + 1u);
      t.check_invariants();
    }
  }
  SUBCASE("newly inserted ancestors adopt existing descendants") {
    Flowtree t(FeatureSetId::kSI, {100, 1e-6, 1});
    t.add(si("src_ip=10.1.0.0|16"), flows(1));
    t.add(si("src_ip=10.2.0.0|16"), flows(1));
    t.add(si("src_ip=20.2.0.0|16"), flows(1));
    REQUIRE(t.size() == 4);
    t.add(si("src_ip=10.0.0.0|8"), flows(1));
    CHECK(*t.parent_of(si("src_ip=10.1.0.0|16")) == si("src_ip=10.0.0.0|8"));
    CHECK(*t.parent_of(si("src_ip=10.2.0.0|16")) == si("src_ip=10.0.0.0|8"));
    CHECK(*t.parent_of(si("src_ip=20.2.0.0|16")) == FlowKey::root(FeatureSetId::kSI));
    t.check_invariants();
  }
  SUBCASE("mismatched feature set and malformed keys are rejected") {
    Flowtree t(FeatureSetId::kSI);
    CHECK_THROWS_AS(t.add(FlowKey::root(FeatureSetId::kDI), flows(1)), FeatureSetMismatch);
    CHECK_THROWS_AS(t.add(parse_key(FeatureSetId::kSIDP, "src_ip=1.0.0.0|8 dst_port=ANY"), flows(1)),
                    FeatureSetMismatch);
    Flowtree t2(FeatureSetId::kSIDP);
    CHECK_THROWS_AS(t2.add(parse_key(FeatureSetId::kSIDP, "src_ip=1.0.0.0|20 dst_port=ANY"), flows(1)),
                    InvalidKey);
  }
  SUBCASE("overflow is reported, not wrapped") {
    Flowtree t(FeatureSetId::kSI);
    t.add(si("src_ip=1.2.3.4"), {~0ULL, 1, 1});
    CHECK_THROWS_AS(t.add(si("src_ip=1.2.3.4"), flows(1)), CounterOverflow);
    CHECK(t.total().flows == ~0ULL);
  }
}

TEST_CASE("stats sums a chain bottom-up") {
  const auto a = si("src_ip=10.0.0.0|8"), b = si("src_ip=10.1.0.0|16");
  const auto t = Flowtree::from_entries(FeatureSetId::kSI, {}, {{FlowKey::root(FeatureSetId::kSI), flows(1)},
                                                                {a, flows(2)}, {b, flows(3)}});
  const auto s = t.stats();
  CHECK(s.at(b).pop.flows == 3);
  CHECK(s.at(a).pop.flows == 5);
  CHECK(s.at(FlowKey::root(FeatureSetId::kSI)).pop.flows == 6);
  CHECK(s.at(a).comp_pop.flows == 2);
}

TEST_CASE("stats matches a recursive subtree oracle on a random tree") {
  std::mt19937_64 rng(5);
  const auto fl = teststreams::random_stream(rng, {3000, 40, 8, 20});
  const Flowtree t = Flowtree::build(fl, FeatureSetId::kSIDI, {1000, 0.3, 9});
  CHECK(t.size() <= 1000);
  const auto entries = t.entries();
  const auto s = t.stats();
  // Recursive oracle: pop(n) = comp(n) + pop of the tree children identified
  // purely from the key set as nearest present ancestors.
  std::function<PopCounters(const FlowKey&)> pop_of = [&](const FlowKey& k) {
    PopCounters p = *t.comp_pop(k);
    for (const auto& c : t.children_of(k)) p += pop_of(c);
    return p;
  };
  for (const auto& [k, c] : entries) {
    CHECK(s.at(k).pop == pop_of(k));
    CHECK(s.at(k).pop.dominates(s.at(k).comp_pop));
  }
  CHECK(s.at(FlowKey::root(FeatureSetId::kSIDI)).pop == t.total());
  CHECK(t.total() == input_sum(fl));
}

TEST_CASE("delete_node") {
  Flowtree t(FeatureSetId::kSI, exact_opts());
  const auto leaf = si("src_ip=1.2.3.4"), mid = si("src_ip=1.2.0.0|16");
  t.add(leaf, flows(5));
  t.add(mid, flows(2));
  const auto parent_of_mid = *t.parent_of(mid);
  const auto before = comp_sum(t);
  t.delete_node(mid);
  CHECK_FALSE(t.contains(mid));
  CHECK(t.comp_pop(parent_of_mid)->flows == 2);
  const auto kids = t.children_of(parent_of_mid);
  CHECK(std::find(kids.begin(), kids.end(), si("src_ip=1.2.3.4|17")) != kids.end());
  CHECK(comp_sum(t) == before);
  t.check_invariants();
  CHECK_THROWS_AS(t.delete_node(FlowKey::root(FeatureSetId::kSI)), RootDeletion);
  CHECK_THROWS_AS(t.delete_node(mid), KeyNotFound);

  Flowtree u(FeatureSetId::kSI, {100, 0.01, 3});
  u.add(leaf, flows(5));
  if (*u.parent_of(leaf) == FlowKey::root(FeatureSetId::kSI)) {
    u.delete_node(leaf);
    CHECK(u.comp_pop(FlowKey::root(FeatureSetId::kSI))->flows == 5);
  }
}

TEST_CASE("compress") {
  SUBCASE("zero thresholds are the identity") {
    std::mt19937_64 rng(1);
    Flowtree t = Flowtree::build(teststreams::random_stream(rng, {}), FeatureSetId::kSP, {4000, 0.3, 1});
    const auto before = as_map(t);
    t.compress(0, 0);
    CHECK(as_map(t) == before);
  }
  SUBCASE("small leaves fold into their parent") {
    const auto root = FlowKey::root(FeatureSetId::kSI);
    const auto p = si("src_ip=10.0.0.0|8");
    Flowtree t = Flowtree::from_entries(FeatureSetId::kSI, {}, {{root, {}}, {p, {}},
        {si("src_ip=10.1.0.0|16"), flows(1)}, {si("src_ip=10.2.0.0|16"), flows(1)},
        {si("src_ip=10.3.0.0|16"), flows(10)}});
    t.compress(2, 0);
    CHECK(t.size() == 3);
    CHECK(t.comp_pop(p)->flows == 2);
    CHECK(t.query(root).pop.flows == 12);
    t.check_invariants();
  }
  SUBCASE("cascading exposure is handled in one pass") {
    const auto root = FlowKey::root(FeatureSetId::kSI);
    Flowtree t = Flowtree::from_entries(FeatureSetId::kSI, {}, {{root, {}},
        {si("src_ip=10.0.0.0|8"), {}}, {si("src_ip=10.1.0.0|16"), {}},
        {si("src_ip=10.1.1.0|24"), flows(1)}});
    t.compress(2, 0);
    CHECK(t.size() == 1);
    CHECK(t.comp_pop(root)->flows == 1);
  }
  SUBCASE("random trees conserve totals under any thresholds") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
      Flowtree t = Flowtree::build(teststreams::random_stream(rng, {2000, 30, 10, 5}),
                                   FeatureSetId::kSIDP, {3000, 0.5, rng()});
      const auto total = t.total();
      t.compress(rng() % 20, rng() % 50);
      CHECK(comp_sum(t) == total);
      CHECK(t.query(FlowKey::root(FeatureSetId::kSIDP)).pop == total);
      t.check_invariants();
    }
  }
}

TEST_CASE("compress_to_capacity") {
  std::mt19937_64 rng(4);
  Flowtree t = Flowtree::build(teststreams::random_stream(rng, {20000, 400, 64, 5}), FeatureSetId::kSIDI,
                               exact_opts());
  REQUIRE(t.size() > 5000);
  const auto total = t.total();
  const auto n = t.size();
  Flowtree same = t;
  same.compress_to_capacity(n + 10);
  CHECK(as_map(same) == as_map(t));
  t.compress_to_capacity(2000);
  CHECK(t.size() <= 2000);
  CHECK(t.size() > 1500);
  CHECK(comp_sum(t) == total);
  t.check_invariants();
  CHECK_THROWS_AS(t.compress_to_capacity(15), InvalidArgument);
}

TEST_CASE("compress_to_capacity with uniform counters is deterministic") {
  std::vector<std::pair<FlowKey, PopCounters>> entries;
  for (std::uint32_t i = 0; i < 500; ++i) {
    FlowKey k{FeatureSetId::kSP, {16}, {i * 97 % 65536}};
    entries.emplace_back(k, flows(1));
  }
  auto build = [&] {
    Flowtree a = Flowtree::from_entries(FeatureSetId::kSP, {1000, 0.3, 1}, entries);
    a.compress_to_capacity(100);
    return a;
  };
  const Flowtree a = build(), b = build();
  CHECK(a.size() <= 100);
  CHECK(as_map(a) == as_map(b));
  CHECK(a.total().flows == 500);
}

TEST_CASE("merge") {
  std::mt19937_64 rng(6);
  const auto s1 = teststreams::random_stream(rng, {3000, 50, 10, 5});
  const auto s2 = teststreams::random_stream(rng, {3000, 50, 10, 5});
  const Flowtree a = Flowtree::build(s1, FeatureSetId::kDISP, {2000, 0.3, 1});
  const Flowtree b = Flowtree::build(s2, FeatureSetId::kDISP, {3000, 0.3, 2});
  const Flowtree empty(FeatureSetId::kDISP, {2000, 0.3, 1});

  const Flowtree with_empty = Flowtree::merge(a, empty);
  CHECK(as_map(with_empty) == as_map(a));
  CHECK(with_empty.total() == a.total());

  const Flowtree m = Flowtree::merge(a, b);
  CHECK(m.total() == a.total() + b.total());
  CHECK(comp_sum(m) == m.total());
  CHECK(m.size() <= 3000);
  CHECK(m.max_nodes() == 3000);
  m.check_invariants();

  MergeOptions raw;
  raw.compress = false;
  const Flowtree* ab[] = {&a, &b};
  const Flowtree* ba[] = {&b, &a};
  const auto mab = Flowtree::merge_all(ab, raw), mba = Flowtree::merge_all(ba, raw);
  CHECK(as_map(mab) == as_map(mba));
  for (const auto& [k, c] : a.entries()) {
    CHECK(mab.comp_pop(k)->dominates(c));
  }

  CHECK_THROWS_AS(Flowtree::merge(a, Flowtree(FeatureSetId::kSI)), FeatureSetMismatch);
  CHECK_THROWS_AS(Flowtree::merge_all({}), InvalidArgument);
}

TEST_CASE("parallel merge matches sequential merge") {
  std::mt19937_64 rng(8);
  std::vector<Flowtree> trees;
  for (int i = 0; i < 12; ++i) {
    trees.push_back(Flowtree::build(teststreams::random_stream(rng, {500, 40, 8, 5}), FeatureSetId::kSI,
                                    {500, 0.3, static_cast<std::uint64_t>(i)}));
  }
  std::vector<const Flowtree*> ptrs;
  for (const auto& t : trees) ptrs.push_back(&t);
  MergeOptions seq, par;
  par.workers = 3;
  CHECK(as_map(Flowtree::merge_all(ptrs, seq)) == as_map(Flowtree::merge_all(ptrs, par)));
}

TEST_CASE("diff") {
  std::mt19937_64 rng(9);
  const Flowtree t = Flowtree::build(teststreams::random_stream(rng, {}), FeatureSetId::kDP, {500, 0.3, 1});
  const Flowtree d = Flowtree::diff(t, t);
  for (const auto& [k, c] : d.entries()) CHECK(c.is_zero());
  CHECK(d.total().is_zero());

  const Flowtree e = Flowtree::diff(t, Flowtree(FeatureSetId::kDP));
  CHECK(as_map(e) == as_map(t));

  const FlowKey k{FeatureSetId::kDP, {16}, {53}};
  Flowtree a(FeatureSetId::kDP, exact_opts()), b(FeatureSetId::kDP, exact_opts());
  a.add(k, flows(5));
  b.add(k, flows(2));
  CHECK(Flowtree::diff(a, b).comp_pop(k)->flows == 3);
  CHECK(Flowtree::diff(b, a).comp_pop(k)->flows == 3);
  CHECK_THROWS_AS(Flowtree::diff(a, Flowtree(FeatureSetId::kSP)), FeatureSetMismatch);
}

TEST_CASE("query reports exact values for nodes and bounded estimates otherwise") {
  Flowtree t(FeatureSetId::kSI, exact_opts());
  const auto root = FlowKey::root(FeatureSetId::kSI);
  t.add(si("src_ip=10.1.2.3"), flows(4));
  t.add(si("src_ip=10.1.9.9"), flows(6));
  const auto r = t.query(root);
  CHECK(r.exact);
  CHECK(r.pop.flows == 10);
  CHECK(t.query(si("src_ip=10.1.2.3")).pop.flows == 4);
  CHECK(t.query(si("src_ip=10.1.2.3")).exact);
  const auto absent = t.query(si("src_ip=10.1.3.0|24"));
  CHECK_FALSE(absent.exact);
  CHECK(absent.pop.flows == 0);
  CHECK_THROWS_AS(t.query(FlowKey::root(FeatureSetId::kDI)), FeatureSetMismatch);

  // After pruning, a missing key inherits at most its ancestor's share.
  Flowtree c = Flowtree::from_entries(FeatureSetId::kSI, {}, {{root, {}},
      {si("src_ip=10.0.0.0|8"), flows(50)}, {si("src_ip=10.1.0.0|16"), flows(10)},
      {si("src_ip=10.2.0.0|16"), flows(5)}});
  const auto q = c.query(si("src_ip=10.0.0.0|9"));
  CHECK_FALSE(q.exact);
  CHECK(q.lower.flows == 15);
  CHECK(q.pop.flows == 65);
  const auto q2 = c.query(si("src_ip=10.128.0.0|9"));
  CHECK(q2.lower.flows == 0);
  CHECK(q2.pop.flows == 50);
  CHECK(q2.pop.dominates(q2.lower));
}

TEST_CASE("query bounds hold on exact trees for arbitrary keys") {
  std::mt19937_64 rng(12);
  const auto fl = teststreams::random_stream(rng, {2000, 30, 10, 5});
  const Flowtree t = Flowtree::build(fl, FeatureSetId::kSIDP, exact_opts());
  for (int i = 0; i < 300; ++i) {
    const auto& r = fl[rng() % fl.size()];
    FlowKey k = key_from_flow(r, FeatureSetId::kSIDP);
    k.masks[0] = static_cast<std::uint8_t>(rng() % 33);
    k.masks[1] = static_cast<std::uint8_t>(rng() % 17);
    if (rng() % 3 == 0) k.values[0] ^= static_cast<std::uint32_t>(rng());
    k = canonicalize(k);
    const auto rep = t.query(k);
    const auto truth = oracle::count(k, fl);
    CHECK(rep.pop == truth);
    CHECK(rep.pop.dominates(rep.lower));
  }
}

TEST_CASE("subtree_query") {
  std::mt19937_64 rng(13);
  const Flowtree t = Flowtree::build(teststreams::random_stream(rng, {1000, 20, 6, 5}), FeatureSetId::kSISP,
                                     {800, 0.3, 3});
  CHECK(t.subtree_query(FlowKey::root(FeatureSetId::kSISP)).size() == t.size());
  const auto entries = t.entries();
  const auto leaf = entries.back().first;
  const auto single = t.subtree_query(leaf);
  REQUIRE(single.size() == 1);
  CHECK(single[0].key == leaf);

  FlowKey pattern = FlowKey::root(FeatureSetId::kSISP);
  pattern.masks[1] = 16;
  pattern.values[1] = leaf.values[1];
  std::set<std::string> expected, got;
  for (const auto& [k, c] : entries) {
    if (k.masks[1] == 16 && k.values[1] == leaf.values[1]) expected.insert(to_string(k));
  }
  for (const auto& r : t.subtree_query(pattern)) got.insert(to_string(r.key));
  CHECK(got == expected);
}

TEST_CASE("drill_down") {
  std::mt19937_64 rng(14);
  const Flowtree t = Flowtree::build(teststreams::random_stream(rng, {}), FeatureSetId::kDI, {300, 0.3, 2});
  std::multiset<std::string> seen;
  for (const auto& [k, c] : t.entries()) {
    for (const auto& r : t.drill_down(k)) seen.insert(to_string(r.key));
  }
  std::multiset<std::string> expected;
  for (const auto& [k, c] : t.entries()) {
    if (!k.is_root()) expected.insert(to_string(k));
  }
  CHECK(seen == expected);
  CHECK(t.drill_down(t.entries().back().first).empty());
  CHECK_THROWS_AS(t.drill_down(parse_key(FeatureSetId::kDI, "dst_ip=1.2.3.4|31")), KeyNotFound);
}

TEST_CASE("above_t on a hand-built tree") {
  // root(0) -> A(10) -> {B(20), C(5)}; root -> D(31); B -> E(4)
  const auto root = FlowKey::root(FeatureSetId::kSI);
  const auto A = si("src_ip=10.0.0.0|8"), B = si("src_ip=10.1.0.0|16"), C = si("src_ip=10.2.0.0|16"),
             D = si("src_ip=20.0.0.0|8"), E = si("src_ip=10.1.1.0|24");
  const Flowtree t = Flowtree::from_entries(FeatureSetId::kSI, {},
      {{root, {}}, {A, flows(10)}, {B, flows(20)}, {C, flows(5)}, {D, flows(31)}, {E, flows(4)}});
  // pops: E=4 B=24 C=5 A=39 D=31 root=70
  std::vector<FlowKey> got;
  for (const auto& r : t.above_t(29)) got.push_back(r.key);
  CHECK(got == std::vector<FlowKey>{root, A, D});
  CHECK(t.above_t(70).empty());
  CHECK(t.above_t(0).size() == 6);
}

TEST_CASE("top_k") {
  Flowtree single(FeatureSetId::kSI, exact_opts());
  single.add(si("src_ip=1.2.3.4"), flows(3));
  const auto one = single.top_k(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].key == si("src_ip=1.2.3.4"));
  CHECK(single.top_k(1000).size() == single.size());
  CHECK_THROWS_AS(single.top_k(0), InvalidArgument);

  std::mt19937_64 rng(15);
  for (int round = 0; round < 5; ++round) {
    const Flowtree t = Flowtree::build(teststreams::random_stream(rng, {4000, 60, 10, 5}),
                                       FeatureSetId::kSIDI, {200, 0.3, rng()});
    REQUIRE(t.size() <= 200);
    const auto ref = reference_top(t, 50);
    const auto got = t.top_k(50);
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(got[i].key == ref[i].first);
      CHECK(got[i].score == ref[i].second);
    }
  }
}

TEST_CASE("top_k candidate filter") {
  std::mt19937_64 rng(16);
  const Flowtree t = Flowtree::build(teststreams::random_stream(rng, {}), FeatureSetId::kSP, {300, 0.3, 1});
  const auto leaves = t.top_k(10, Counter::kFlows, [](const FlowKey& k) { return k.masks[0] == 16; });
  for (const auto& r : leaves) CHECK(r.key.masks[0] == 16);
}

TEST_CASE("hhh") {
  Flowtree t(FeatureSetId::kSI, {100, 0.3, 1});
  t.add(si("src_ip=1.2.3.4"), flows(10));
  CHECK(t.hhh(0.999).size() == 1);
  const auto h = t.hhh(0.5);
  REQUIRE(h.size() == 1);
  CHECK(h[0].key == si("src_ip=1.2.3.4"));
  CHECK(h[0].score == 10);
  CHECK_THROWS_AS(t.hhh(0.0), InvalidArgument);
  CHECK_THROWS_AS(t.hhh(1.0), InvalidArgument);
}

TEST_CASE("exact trees agree with brute-force oracles") {
  std::mt19937_64 rng(17);
  for (FeatureSetId fs : {FeatureSetId::kSI, FeatureSetId::kDP, FeatureSetId::kSIDP, FeatureSetId::kFull}) {
    const auto fl = teststreams::random_stream(rng, {3000, 40, 12, 10});
    const Flowtree t = Flowtree::build(fl, fs, exact_opts());
    const auto lat = oracle::lattice(fl, fs);
    CHECK(t.size() == lat.size());
    for (const auto& [k, pop] : lat) CHECK(t.query(k).pop == pop);

    const auto ref = oracle::top_k(lat, 100, 2);
    const auto got = t.top_k(100, Counter::kBytes);
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(got[i].key == ref[i].key);
      CHECK(got[i].score == ref[i].value);
    }

    const auto href = oracle::hhh(fl, fs, 0.01, 0);
    const auto hgot = t.hhh(0.01);
    REQUIRE(hgot.size() == href.size());
    for (std::size_t i = 0; i < href.size(); ++i) {
      CHECK(hgot[i].key == href[i].key);
      CHECK(hgot[i].score == href[i].value);
    }
  }
}

TEST_CASE("heavy changers") {
  std::mt19937_64 rng(18);
  const auto fl = teststreams::random_stream(rng, {2000, 30, 10, 5});
  const Flowtree a = Flowtree::build(fl, FeatureSetId::kDP, exact_opts());
  for (const auto& r : Flowtree::heavy_changers(a, a, 10)) CHECK(r.score == 0);

  Flowtree b = a;
  const FlowKey k{FeatureSetId::kDP, {16}, {4444}};
  b.add(k, flows(100000));
  const auto hc = Flowtree::heavy_changers(a, b, 5);
  REQUIRE_FALSE(hc.empty());
  CHECK(hc[0].key == k);

  const Flowtree c = Flowtree::build(teststreams::random_stream(rng, {2000, 30, 10, 5}), FeatureSetId::kDP,
                                     exact_opts());
  const auto d1 = Flowtree::diff(a, c), d2 = Flowtree::diff(c, a);
  CHECK(as_map(d1) == as_map(d2));
}

TEST_CASE("rescale") {
  Flowtree t(FeatureSetId::kSI, exact_opts());
  t.add(si("src_ip=1.2.3.4"), flows(3));
  Flowtree same = t;
  same.rescale(1, 1);
  CHECK(as_map(same) == as_map(t));
  t.rescale(2, 1);
  CHECK(t.comp_pop(si("src_ip=1.2.3.4"))->flows == 6);
  CHECK(t.total().flows == 6);
  Flowtree h(FeatureSetId::kSI, exact_opts());
  h.add(si("src_ip=1.2.3.4"), flows(3));
  h.rescale(1, 2);
  CHECK(h.comp_pop(si("src_ip=1.2.3.4"))->flows == 2);
  CHECK_THROWS_AS(h.rescale(0, 1), InvalidArgument);

  std::mt19937_64 rng(19);
  Flowtree r = Flowtree::build(teststreams::random_stream(rng, {}), FeatureSetId::kDI, {300, 0.3, 1});
  const auto before = r.total().flows;
  r.rescale(7, 3);
  const double expect = before * 7.0 / 3.0;
  CHECK(std::abs(static_cast<double>(r.total().flows) - expect) <= static_cast<double>(r.size()));
  CHECK(comp_sum(r) == r.total());
}

TEST_CASE("interior comp_pop accounts for exactly the pruned leaf traffic") {
  std::mt19937_64 rng(20);
  const auto fl = teststreams::random_stream(rng, {20000, 2000, 200, 5});
  const Flowtree t = Flowtree::build(fl, FeatureSetId::kSI, {500, 0.3, 1});
  std::uint64_t interior = 0, leaf_kept = 0;
  const auto leaves = oracle::leaf_counts(fl, FeatureSetId::kSI, 0);
  std::uint64_t pruned = 0;
  for (const auto& [k, n] : leaves) {
    if (!t.contains(k)) pruned += n;
  }
  for (const auto& [k, c] : t.entries()) {
    if (k.masks[0] == 32) {
      leaf_kept += c.flows;
      CHECK(c.flows <= leaves.at(k));
    } else {
      interior += c.flows;
    }
  }
  CHECK(interior + leaf_kept == fl.size());
  // Surviving leaves may have lost early traffic to ancestors before they were re-created.
  CHECK(interior >= pruned);
}

TEST_CASE("identical inputs and seeds give identical trees") {
  std::mt19937_64 rng(21);
  const auto fl = teststreams::random_stream(rng, {5000, 100, 20, 5});
  const Flowtree a = Flowtree::build(fl, FeatureSetId::kFull, {1000, 0.3, 42});
  const Flowtree b = Flowtree::build(fl, FeatureSetId::kFull, {1000, 0.3, 42});
  CHECK(as_map(a) == as_map(b));
}
