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
// Micro benchmarks of the summary, storage encoding and query front end.

#include <benchmark/benchmark.h>

#include <vector>

#include "flowtree/corpus.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/flowql/plan.hpp"
#include "flowtree/flowtree.hpp"
#include "flowtree/serialize.hpp"

using namespace flowtree;

namespace {

const std::vector<FlowRecord>& stream() {
  static const auto s = zipf_stream(100000, 1.1, 50000, 3);
  return s;
}

void BM_BuildTree(benchmark::State& state) {
  const auto fs = static_cast<FeatureSetId>(state.range(0));
  const auto cap = static_cast<std::uint32_t>(state.range(1));
  const auto& flows = stream();
  for (auto _ : state) {
    auto t = Flowtree::build(flows, fs, {cap, kDefaultInsertProbability, 1});
    benchmark::DoNotOptimize(t.size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(flows.size()));
}
BENCHMARK(BM_BuildTree)
    ->Args({static_cast<int>(FeatureSetId::kSI), 1000})
    ->Args({static_cast<int>(FeatureSetId::kSI), 40000})
    ->Args({static_cast<int>(FeatureSetId::kFull), 1000})
    ->Args({static_cast<int>(FeatureSetId::kFull), 40000})
    ->Unit(benchmark::kMillisecond);

std::vector<Flowtree> shards(std::size_t n, std::uint32_t cap) {
  std::vector<Flowtree> out;
  const auto& flows = stream();
  const std::size_t per = flows.size() / n;
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const FlowRecord> part(flows.data() + i * per, per);
    out.push_back(Flowtree::build(part, FeatureSetId::kSIDI, {cap, kDefaultInsertProbability, i}));
  }
  return out;
}

void BM_MergeAll(benchmark::State& state) {
  const auto trees = shards(static_cast<std::size_t>(state.range(0)), 2000);
  std::vector<const Flowtree*> ptrs;
  for (const auto& t : trees) ptrs.push_back(&t);
  for (auto _ : state) {
    auto m = Flowtree::merge_all(ptrs);
    benchmark::DoNotOptimize(m.size());
  }
}
BENCHMARK(BM_MergeAll)->Arg(4)->Arg(24)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_Serialize(benchmark::State& state) {
  const auto t = Flowtree::build(stream(), FeatureSetId::kFull, {10000, kDefaultInsertProbability, 1});
  std::size_t bytes = 0;
  for (auto _ : state) {
    auto b = serialize(t);
    bytes += b.size();
    benchmark::DoNotOptimize(b.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_Serialize);

void BM_Deserialize(benchmark::State& state) {
  const auto b = serialize(Flowtree::build(stream(), FeatureSetId::kFull, {10000, kDefaultInsertProbability, 1}));
  for (auto _ : state) {
    auto t = deserialize(b);
    benchmark::DoNotOptimize(t.size());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(b.size()));
}
BENCHMARK(BM_Deserialize);

void BM_TopK(benchmark::State& state) {
  const auto t = Flowtree::build(stream(), FeatureSetId::kSI, {40000, kDefaultInsertProbability, 1});
  for (auto _ : state) {
    auto r = t.top_k(static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_TopK)->Arg(10)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Hhh(benchmark::State& state) {
  const auto t = Flowtree::build(stream(), FeatureSetId::kSIDI, {40000, kDefaultInsertProbability, 1});
  for (auto _ : state) {
    auto r = t.hhh(0.001);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_Hhh)->Unit(benchmark::kMillisecond);

void BM_ParseAndDnf(benchmark::State& state) {
  const char* q =
      "SELECT top(10,any,byte) FROM (time 2019-04-01 00:00 to 2019-04-01 23:59) "
      "WHERE (site_id=1 or site_id=2 or site_id=3) and (dst_port=53 or dst_port=123|16) and "
      "(src_ip=10.0.0.0|8 or src_ip=192.168.0.0|16)";
  for (auto _ : state) {
    auto parsed = flowql::parse(q);
    auto dnf = flowql::to_dnf(parsed.where);
    benchmark::DoNotOptimize(dnf.size());
  }
}
BENCHMARK(BM_ParseAndDnf);

}  // namespace

BENCHMARK_MAIN();
