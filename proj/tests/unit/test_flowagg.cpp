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

#include <zlib.h>

#include <random>

#include "flowtree/errors.hpp"
#include "flowtree/flowagg.hpp"
#include "support/streams.hpp"

using namespace flowtree;

namespace {

std::string gzip(const std::string& text) {
  z_stream zs{};
  REQUIRE(deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) == Z_OK);
  std::string out(compressBound(static_cast<uLong>(text.size())) + 64, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
  zs.avail_in = static_cast<uInt>(text.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  REQUIRE(deflate(&zs, Z_FINISH) == Z_STREAM_END);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

const std::string kHeader = std::string(kFlowCsvHeader) + "\n";

}  // namespace

TEST_CASE("granularities and tree keys") {
  CHECK(duration_seconds(Granularity::k15m) == 900);
  CHECK(align_down(1800, Granularity::k15m) == 1800);
  CHECK(align_down(1799, Granularity::k15m) == 900);
  CHECK(divides(Granularity::k15m, Granularity::k1d));
  CHECK_FALSE(divides(Granularity::k1h, Granularity::k15m));
  const TreeKey k{7, FeatureSetId::kSIDP, Granularity::k1h, 7200};
  CHECK(to_string(k) == "7-SIDP-1h-7200");
  CHECK(parse_tree_key("7-SIDP-1h-7200") == k);
  CHECK(parse_tree_key("ALL-FULL-1d-86400")->site == kAllSites);
  CHECK_FALSE(parse_tree_key("7-SIDP-1h-7201"));
  CHECK_FALSE(parse_tree_key("7-XX-1h-7200"));
  CHECK_FALSE(parse_tree_key("7-SIDP-1h"));
}

TEST_CASE("flow csv parsing") {
  IngestReport rep;
  auto recs = parse_text(kHeader + "100,1,1.2.3.4,5.6.7.8,1234,80,6,3,1800\n", &rep);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].packets == 3);
  CHECK(recs[0].bytes == 1800);
  CHECK(recs[0].ts == 100);
  CHECK(recs[0].dst_port == 80);
  CHECK(rep.records == 1);

  CHECK(parse_text(kHeader).empty());
  CHECK_THROWS_AS(parse_text("100,1,1.2.3.4,5.6.7.8,1234,80,6,3,1800\n"), FormatError);
  CHECK_THROWS_AS(parse_text(""), FormatError);

  std::string body = kHeader;
  for (int i = 0; i < 200; ++i) body += "100,1,1.2.3.4,5.6.7.8,1234,80,6,3,1800\r\n";
  body += "100,1,1.2.3.4,5.6.7.8,70000,80,6,3,1800\n";
  recs = parse_text(body, &rep);
  CHECK(recs.size() == 200);
  CHECK(rep.malformed == 1);
  REQUIRE(rep.malformed_examples.size() == 1);
  CHECK(rep.malformed_examples[0] == 202);
  CHECK(rep.to_string().find("malformed=1") != std::string::npos);
}

TEST_CASE("malformed lines beyond the threshold fail ingestion") {
  std::string body = kHeader;
  for (int i = 0; i < 50; ++i) body += "100,1,1.2.3.4,5.6.7.8,1234,80,6,3,1800\n";
  body += "garbage\n";
  CHECK_THROWS_AS(parse_text(body), IngestQualityError);
  ParseOptions lenient;
  lenient.max_malformed_fraction = 0.05;
  CHECK(parse_text(body, nullptr, lenient).size() == 50);
}

TEST_CASE("record validation") {
  ParseOptions lenient;
  lenient.max_malformed_fraction = 1.0;
  IngestReport rep;
  const std::string body = kHeader +
                           "100,1,1.2.3.4,5.6.7.8,1234,80,6,0,10\n"       // zero packets
                           "100,1,1.2.3.4,5.6.7.8,1234,80,6,5,2\n"        // bytes < packets: flagged
                           "100,1,1.2.3.256,5.6.7.8,1234,80,6,5,2000\n"   // bad ip
                           "100,1,1.2.3.4,5.6.7.8,1234,80,6,5\n"          // missing field
                           "100,1,1.2.3.4,5.6.7.8,1234,80,300,5,900\n"    // bad proto
                           "x,1,1.2.3.4,5.6.7.8,1234,80,6,5,900\n"        // bad ts
                           "100,1,1.2.3.4,5.6.7.8,1234,80,6,5,900,1\n";   // extra field
  const auto recs = parse_text(body, &rep, lenient);
  CHECK(recs.size() == 1);
  CHECK(rep.flagged == 1);
  CHECK(rep.malformed == 6);
}

TEST_CASE("packet summaries") {
  const std::string body = std::string(kPacketCsvHeader) +
                           "\n2000000,3,1.1.1.1,2.2.2.2,5,6,17,60\n"
                           "1000000,3,1.1.1.1,2.2.2.2,5,6,17,60\n";
  const auto recs = parse_text(body);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].packets == 1);
  CHECK(recs[0].bytes == 60);
  CHECK(recs[0].ts == 2);
  CHECK(recs[1].ts == 1);
}

TEST_CASE("gzip input is detected by magic bytes") {
  std::string body = kHeader;
  for (int i = 0; i < 5000; ++i) {
    body += std::to_string(i) + ",1,1.2.3.4,5.6.7.8,1234,80,6,3,1800\n";
  }
  IngestReport rep;
  auto in = LineReader::from_bytes(gzip(body));
  std::size_t n = 0;
  rep = parse_input(*in, [&](const FlowRecord&) { ++n; });
  CHECK(rep.gzip);
  CHECK(n == 5000);
  // Two concatenated members.
  auto in2 = LineReader::from_bytes(gzip(body) + gzip("1,1,1.2.3.4,5.6.7.8,1,2,6,1,1\n"));
  n = 0;
  parse_input(*in2, [&](const FlowRecord&) { ++n; });
  CHECK(n == 5001);
  std::string broken = gzip(body);
  broken.resize(broken.size() / 2);
  auto in3 = LineReader::from_bytes(broken);
  CHECK_THROWS_AS(parse_input(*in3, [](const FlowRecord&) {}), FormatError);
}

TEST_CASE("csv writer round-trips") {
  std::mt19937_64 rng(1);
  const auto recs = teststreams::random_stream(rng, {300, 20, 5, 5});
  const auto back = parse_text(to_flow_csv(recs));
  CHECK(back == recs);
}

TEST_CASE("bin_and_build partitions by site and bin") {
  std::vector<FlowRecord> recs;
  for (std::uint32_t site : {1u, 2u}) {
    for (std::uint64_t ts : {0ull, 899ull, 900ull, 1000ull}) {
      FlowRecord r;
      r.site_id = site;
      r.ts = ts;
      r.src_ip = static_cast<std::uint32_t>(ts * 7919 + site);
      r.packets = 2;
      r.bytes = 100;
      recs.push_back(r);
    }
  }
  AggConfig cfg;
  const auto trees = bin_and_build(recs, cfg);
  CHECK(trees.size() == 2 * 2 * 11);
  for (const auto& [k, t] : trees) {
    CHECK(k.granularity == Granularity::k15m);
    CHECK((k.start == 0 || k.start == 900));
    CHECK(t.total().flows == 2);
    CHECK(t.total().packets == 4);
    CHECK(t.max_nodes() == cfg.cap(k.feature_set));
  }
  CHECK(cfg.cap(FeatureSetId::kSP) == 10000);
  CHECK(cfg.cap(FeatureSetId::kSI) == 40000);
}

TEST_CASE("aggregator emits behind the watermark and re-opens late bins") {
  AggConfig cfg;
  cfg.feature_sets = {FeatureSetId::kSI};
  cfg.watermark_bins = 2;
  std::vector<std::pair<TreeKey, std::uint64_t>> emitted;
  Aggregator agg(cfg, [&](const TreeKey& k, Flowtree&& t) { emitted.emplace_back(k, t.total().flows); });
  auto rec = [](std::uint64_t ts) {
    FlowRecord r;
    r.ts = ts;
    r.site_id = 4;
    return r;
  };
  agg.add(rec(0));
  agg.add(rec(900));
  agg.add(rec(1800));
  CHECK(emitted.empty());
  agg.add(rec(2700));  // bin 0 is now two bins behind
  REQUIRE(emitted.size() == 1);
  CHECK(emitted[0].first.start == 0);
  agg.add(rec(10));  // late for bin 0
  CHECK(agg.late_records() == 1);
  agg.add(rec(5400));
  CHECK(emitted.size() == 4);
  agg.flush();
  std::uint64_t bin0 = 0;
  for (const auto& [k, n] : emitted) {
    if (k.start == 0) bin0 += n;
  }
  CHECK(bin0 == 2);
  CHECK(agg.open_bins() == 0);
}

TEST_CASE("scale factor hook rescales emitted trees") {
  AggConfig cfg;
  cfg.feature_sets = {FeatureSetId::kDP};
  cfg.scale = std::pair<std::uint64_t, std::uint64_t>{10, 1};
  FlowRecord r;
  r.packets = 3;
  r.bytes = 5;
  const std::vector<FlowRecord> recs(4, r);
  const auto trees = bin_and_build(recs, cfg);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].second.total().flows == 40);
  CHECK(trees[0].second.total().bytes == 200);
}

TEST_CASE("rollups") {
  std::mt19937_64 rng(2);
  AggConfig cfg;
  cfg.feature_sets = {FeatureSetId::kSIDI};
  std::vector<FlowRecord> recs = teststreams::random_stream(rng, {4000, 50, 8, 5});
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].ts = 86400 + (i % 4) * 900 + i % 7;
  const auto trees = bin_and_build(recs, cfg);
  REQUIRE(trees.size() == 4);
  std::vector<KeyedTree> in;
  PopCounters sum;
  for (const auto& [k, t] : trees) {
    in.emplace_back(k, &t);
    sum += t.total();
  }
  auto [hk, h] = rollup(in, Granularity::k1h, 40000);
  CHECK(hk == TreeKey{1, FeatureSetId::kSIDI, Granularity::k1h, 86400});
  CHECK(h.total() == sum);

  std::vector<KeyedTree> one{in[2]};
  auto [ok1, o] = rollup(one, Granularity::k1h, 40000);
  CHECK(o.entries() == trees[2].second.entries());

  CHECK_THROWS_AS(rollup(in, Granularity::k15m, 40000), WindowError);
  Flowtree other(FeatureSetId::kSIDI);
  std::vector<KeyedTree> spans = in;
  spans.emplace_back(TreeKey{1, FeatureSetId::kSIDI, Granularity::k15m, 86400 + 3600}, &other);
  CHECK_THROWS_AS(rollup(spans, Granularity::k1h, 40000), WindowError);
  CHECK_THROWS_AS(rollup({}, Granularity::k1h, 40000), InvalidArgument);

  // Sites rollup.
  Flowtree a(FeatureSetId::kSI, {100, 1.0, 1}), b(FeatureSetId::kSI, {100, 1.0, 1});
  a.add(parse_key(FeatureSetId::kSI, "src_ip=1.0.0.0|8"), {1, 1, 1});
  b.add(parse_key(FeatureSetId::kSI, "src_ip=2.0.0.0|8"), {2, 2, 2});
  std::vector<KeyedTree> sites{{TreeKey{1, FeatureSetId::kSI, Granularity::k15m, 0}, &a},
                               {TreeKey{2, FeatureSetId::kSI, Granularity::k15m, 0}, &b}};
  auto [ak, all] = sites_rollup(sites, 40000);
  CHECK(ak.site == kAllSites);
  CHECK(all.total().flows == 3);
  CHECK(all.contains(parse_key(FeatureSetId::kSI, "src_ip=1.0.0.0|8")));
  CHECK(all.contains(parse_key(FeatureSetId::kSI, "src_ip=2.0.0.0|8")));
  std::vector<KeyedTree> single{sites[0]};
  CHECK(sites_rollup(single, 40000).second.entries() == a.entries());
  sites[1].first.start = 900;
  CHECK_THROWS_AS(sites_rollup(sites, 40000), WindowError);
}
