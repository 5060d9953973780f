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

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "flowtree/corpus.hpp"
#include "flowtree/errors.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/pipeline.hpp"
#include "flowtree/serialize.hpp"
#include "flowtree/service/bench.hpp"
#include "flowtree/service/config.hpp"
#include "flowtree/service/format.hpp"
#include "flowtree/service/http.hpp"
#include "flowtree/service/shell.hpp"
#include "support/tempdir.hpp"

using namespace flowtree;
using namespace flowtree::service;
using json = nlohmann::json;

namespace {

constexpr const char* kTopPorts =
    "SELECT top(10,any,byte) FROM (time 2019-04-01 00:00 to 2019-04-01 03:59) "
    "WHERE site_id=ANY and dst_port=ANY";

/// Three sites over four hours with the anomaly at site 2, ingested and
/// rolled up once per test binary.
struct Store {
  testsupport::TempDir dir;
  Corpus corpus;
  std::unique_ptr<FlowDB> db;

  Store() {
    CorpusConfig cc;
    cc.sites = 3;
    cc.duration = 4 * 3600;
    cc.flows_per_bin = 60;
    cc.attack_site = 2;
    cc.attack_flows = 600;
    corpus = generate_corpus(cc);
    db = std::make_unique<FlowDB>(dir.path());
    IngestOptions io;
    io.agg.max_nodes.fill(200);
    ingest_records(*db, corpus.records, io);
    RollupOptions ro;
    ro.max_nodes.fill(200);
    build_rollups(*db, ro);
  }
};

Store& shared_store() {
  static Store s;
  return s;
}

ServerConfig loopback() {
  ServerConfig cfg;
  cfg.listen = "127.0.0.1:0";
  cfg.workers = 2;
  cfg.max_body_bytes = 1 << 20;
  return cfg;
}

std::vector<json> json_lines(const std::string& body) {
  std::vector<json> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::string get_path(std::string_view q) {
  return "/api/v1/query?q=" + httplib::detail::encode_query_param(std::string(q));
}

}  // namespace

TEST_CASE("config: key=value entries, comments and validation") {
  ServerConfig cfg;
  apply_config_text(cfg,
                    "# comment\n"
                    "store = /tmp/x/../y\n"
                    "listen=0.0.0.0:9000  # trailing\n"
                    "\n"
                    "cache_trees = 77\n"
                    "workers = 3\n"
                    "rollups = 1h, 1d, 1w\n"
                    "feature_sets = SI,DP\n"
                    "max_nodes = 300\n"
                    "max_nodes.DP = 500\n"
                    "query_timeout_ms = 1500\n");
  cfg.normalize();
  CHECK(cfg.store == std::filesystem::path("/tmp/y"));
  CHECK(cfg.listen_endpoint() == std::pair<std::string, int>{"0.0.0.0", 9000});
  CHECK(cfg.cache_trees == 77);
  CHECK(cfg.workers == 3);
  CHECK(cfg.rollups == std::vector<Granularity>{Granularity::k1h, Granularity::k1d, Granularity::k1w});
  CHECK(cfg.feature_sets == std::vector<FeatureSetId>{FeatureSetId::kSI, FeatureSetId::kDP});
  CHECK(cfg.max_nodes[static_cast<std::size_t>(FeatureSetId::kSI)] == 300);
  CHECK(cfg.max_nodes[static_cast<std::size_t>(FeatureSetId::kDP)] == 500);
  CHECK(cfg.query_timeout.count() == 1500);
  CHECK(cfg.agg_config().cap(FeatureSetId::kDP) == 500);
  CHECK(cfg.store_options().max_cached_trees == 77);

  ServerConfig rel;
  rel.store = "relative/store";
  rel.normalize();
  CHECK(rel.store.is_absolute());

  ServerConfig bad;
  CHECK_THROWS_WITH_AS(apply_config_text(bad, "store=a\nbogus = 1\n"), doctest::Contains("line 2"),
                       InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "workers = 0"), InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "workers = many"), InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "listen = nowhere"), InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "max_nodes = 3"), InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "rollups = 5m"), InvalidArgument);
  CHECK_THROWS_AS(apply_config_text(bad, "just words"), InvalidArgument);
  ServerConfig fine_rollup;
  fine_rollup.rollups = {Granularity::k1m};
  CHECK_THROWS_AS(fine_rollup.normalize(), InvalidArgument);

  testsupport::TempDir dir;
  std::ofstream(dir.path() / "c.conf") << "cache_trees = 5\n";
  ServerConfig from_file;
  apply_config_file(from_file, dir.path() / "c.conf");
  CHECK(from_file.cache_trees == 5);
  CHECK_THROWS_AS(apply_config_file(from_file, dir.path() / "missing.conf"), StorageError);
}

TEST_CASE("format: table, csv and json encodings of one result") {
  auto& s = shared_store();
  const auto t = flowql::run(kTopPorts, *s.db);
  REQUIRE(t.rows.size() == 10);

  const auto table = format_result(t, OutputFormat::kTable, {true});
  CHECK(table.find("dst_port=123|16") != std::string::npos);
  CHECK(table.find("10 rows in ") != std::string::npos);
  CHECK(format_result(t, OutputFormat::kTable).find(" in ") == std::string::npos);
  // Every row line of the table has the width of the header line.
  std::istringstream lines(table);
  std::string header, line;
  std::getline(lines, header);
  for (int i = 0; i < 11 && std::getline(lines, line); ++i) CHECK(line.size() <= header.size() + 8);

  const auto csv = format_result(t, OutputFormat::kCsv);
  CHECK(csv.rfind("bin_start,bin_end,site,fs,key,flows,packets,bytes,score,exact,partial\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);

  const auto rows = json_lines(format_result(t, OutputFormat::kJsonLines));
  REQUIRE(rows.size() == 11);
  CHECK(rows.back().contains("meta"));
  CHECK(rows.back()["meta"]["rows"] == 10);
  CHECK(rows[0]["key"] == to_string(t.rows[0].key));
  CHECK(rows[0]["bytes"] == t.rows[0].counters.bytes);

  const auto arr = json::parse(format_result(t, OutputFormat::kJsonArray));
  REQUIRE(arr.is_array());
  CHECK(arr.size() == 10);
  CHECK(arr[3] == rows[3]);

  CHECK(parse_format("json-lines") == OutputFormat::kJsonLines);
  CHECK_FALSE(parse_format("xml"));
}

TEST_CASE("caret messages point at the offending token") {
  const std::string q = "SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59)\nWHERE site_id=ANY or or";
  try {
    flowql::parse(q);
    FAIL("parse should fail");
  } catch (const SyntaxError& e) {
    const auto msg = caret_message(q, e);
    CHECK(msg.rfind("WHERE site_id=ANY or or\n                     ^\n", 0) == 0);
    CHECK(msg.find("line 2, column 22") != std::string::npos);
  }
}

TEST_CASE("shell: meta commands, timing footer and carets") {
  auto& s = shared_store();
  std::ostringstream out;
  Shell sh(*s.db, out);
  CHECK(sh.feed("\\timing on"));
  CHECK(sh.options().timing);
  CHECK(sh.feed("SELECT pop FROM (time 2019-04-01 00:00"));
  CHECK(sh.pending());
  CHECK(sh.feed("  to 2019-04-01 00:59) WHERE site_id=ANY;"));
  CHECK_FALSE(sh.pending());
  CHECK(out.str().find("1 row in ") != std::string::npos);

  out.str("");
  sh.feed("\\timing off");
  sh.feed("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY;");
  CHECK(out.str().find(" ms") == std::string::npos);

  out.str("");
  sh.feed("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY and (;");
  CHECK(out.str().find("\n                                                                                   ^\n") !=
        std::string::npos);
  CHECK(out.str().find("syntax error") != std::string::npos);

  out.str("");
  sh.feed("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:00) WHERE site_id=ANY;");
  CHECK(out.str().find("semantic error: time range is empty") != std::string::npos);

  out.str("");
  sh.feed("\\format nope");
  sh.feed("\\frobnicate");
  CHECK(out.str().find("usage: \\format") != std::string::npos);
  CHECK(out.str().find("unknown command \\frobnicate") != std::string::npos);

  out.str("");
  sh.feed("\\explain SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY");
  CHECK(out.str().find("mini-queries: 1") != std::string::npos);
  CHECK_FALSE(sh.feed("\\quit"));
  CHECK_FALSE(sh.feed("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY;"));
}

TEST_CASE("shell: scripted NTP drill-down session") {
  auto& s = shared_store();
  std::istringstream script(
      "\\format csv\n"
      "SELECT hc(5) FROM (time 2019-04-01 00:00 to 2019-04-01 00:59)\n"
      "  (time 2019-04-01 01:00 to 2019-04-01 01:59) WHERE site_id=ITR and dst_port=ANY;\n"
      "SELECT pop(any,flow,bin15) FROM (time 2019-04-01 00:00 to 2019-04-01 02:59)\n"
      "  WHERE site_id=2 and dst_port=123|16;\n"
      "SELECT top(3) FROM (time 2019-04-01 01:15 to 2019-04-01 01:44)\n"
      "  WHERE site_id=2 and dst_port=123 and dst_ip=ANY;\n"
      "\\quit\n");
  std::ostringstream out;
  Shell sh(*s.db, out);
  sh.run(script, false);
  const std::string text = out.str();
  INFO(text);

  auto minute_of_day = [](const std::string& stamp) {
    return std::stoi(stamp.substr(11, 2)) * 60 + std::stoi(stamp.substr(14, 2));
  };
  bool hc_found = false;
  std::vector<std::string> bins, heavy;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    std::vector<std::string> f;
    std::istringstream fields(line);
    for (std::string x; std::getline(fields, x, ',');) f.push_back(x);
    if (f.size() != 11 || f[2] != "2" || f[3] != "DP" || f[4] != "dst_port=123|16") continue;
    const int span = minute_of_day(f[1]) - minute_of_day(f[0]) + 1;
    if (span == 120) hc_found = true;
    if (span != 15) continue;
    bins.push_back(f[0]);
    if (std::stoull(f[5]) >= 200) heavy.push_back(f[0]);
  }
  // hc: port 123 at site 2 is among the changers.
  CHECK(hc_found);
  // Drill-down: 12 quarter-hour rows, and exactly the two attack bins stand out.
  CHECK(bins.size() == 12);
  CHECK(heavy == std::vector<std::string>{"2019-04-01 01:15", "2019-04-01 01:30"});
  CHECK(text.find(",2,DIDP,dst_ip=198.51.100.7|32 dst_port=123|16,") != std::string::npos);
}

TEST_CASE("http: query, explain, sites, meta and tree transfer") {
  auto& s = shared_store();
  HttpServer server(*s.db, loopback());
  server.start();
  httplib::Client cli("127.0.0.1", server.port());

  auto res = cli.Get(get_path(kTopPorts));
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
  CHECK(res->has_header("X-Exec-Ms"));
  auto lines = json_lines(res->body);
  REQUIRE(lines.size() == 11);
  CHECK(lines.back()["meta"]["rows"] == 10);
  CHECK(lines[0]["key"] == "dst_port=123|16");

  // Shell and HTTP return identical rows for identical text.
  const auto direct = flowql::run(kTopPorts, *s.db);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(lines[i]["key"] == to_string(direct.rows[i].key));
    CHECK(lines[i]["bytes"] == direct.rows[i].counters.bytes);
  }

  res = cli.Get(get_path(kTopPorts), {{"Accept", "application/json"}});
  REQUIRE(res);
  const auto arr = json::parse(res->body);
  REQUIRE(arr.is_array());
  CHECK(arr.size() == 10);

  res = cli.Get(get_path(kTopPorts), {{"Accept", "text/csv"}});
  REQUIRE(res);
  CHECK(res->get_header_value("Content-Type") == "text/csv");
  CHECK(res->body.rfind("bin_start,bin_end,site,fs,key,", 0) == 0);
  CHECK(std::count(res->body.begin(), res->body.end(), '\n') == 11);

  res = cli.Get("/api/v1/explain?q=" + httplib::detail::encode_query_param(kTopPorts));
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto plan = json::parse(res->body);
  CHECK(plan["mini_queries"].size() == 1);
  CHECK(plan["mini_queries"][0]["feature_set"] == "DP");
  CHECK(plan["text"].get<std::string>().find("mini-queries: 1") != std::string::npos);

  res = cli.Get("/api/v1/sites");
  REQUIRE(res);
  CHECK(json::parse(res->body)["sites"] == json::array({1, 2, 3}));

  res = cli.Get("/api/v1/meta");
  REQUIRE(res);
  const auto meta = json::parse(res->body);
  CHECK(meta["inventory"]["DP"]["sites"] == json::array({"15m", "1h", "1d"}));
  CHECK(meta["inventory"]["DP"]["all"] == json::array({"15m", "1h", "1d"}));
  CHECK(meta["store"]["total"]["trees"].get<std::size_t>() == s.db->keys().size());
  CHECK(meta["time_span"]["from"] == 1554076800);

  const TreeKey key{3, FeatureSetId::kSP, Granularity::k15m, 1554076800 + 900};
  res = cli.Get("/api/v1/trees/" + to_string(key));
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto bytes = s.db->get_bytes(key);
  CHECK(res->body == std::string(bytes.begin(), bytes.end()));

  res = cli.Get("/api/v1/trees/3-SP-15m-1554163200");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = cli.Get("/api/v1/trees/not-a-key");
  REQUIRE(res);
  CHECK(res->status == 400);
  server.stop();
}

TEST_CASE("http: uploads and error statuses") {
  testsupport::TempDir dir;
  FlowDB db(dir.path());
  HttpServer server(db, loopback());
  server.start();
  httplib::Client cli("127.0.0.1", server.port());

  // Fresh store: empty inventories.
  auto res = cli.Get("/api/v1/meta");
  REQUIRE(res);
  const auto meta = json::parse(res->body);
  CHECK(meta["inventory"].empty());
  CHECK(meta["sites"].empty());
  CHECK(meta["time_span"].is_null());

  const auto& corpus = shared_store().corpus;
  std::vector<FlowRecord> bin(corpus.records.begin(), corpus.records.begin() + 50);
  const Flowtree tree = Flowtree::build(bin, FeatureSetId::kDP, {100, 0.3, 1});
  const auto body_bytes = serialize(tree);
  const std::string body(body_bytes.begin(), body_bytes.end());

  const std::string key = "5-DP-15m-1554076800";
  res = cli.Post("/api/v1/trees", {{kTreeKeyHeader, key}}, body, "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(db.get(*parse_tree_key(key))->total() == tree.total());

  // Merge by default, overwrite on request.
  res = cli.Post("/api/v1/trees", {{kTreeKeyHeader, key}}, body, "application/octet-stream");
  REQUIRE(res);
  CHECK(db.get(*parse_tree_key(key))->total() == tree.total() + tree.total());
  res = cli.Post("/api/v1/trees?mode=overwrite", {{kTreeKeyHeader, key}}, body, "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 201);
  CHECK(db.get(*parse_tree_key(key))->total() == tree.total());

  res = cli.Post("/api/v1/trees", {{kTreeKeyHeader, "5-SI-15m-1554076800"}}, body, "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/api/v1/trees", {{kTreeKeyHeader, key}}, std::string("garbage"), "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["error"] == "decode");
  res = cli.Post("/api/v1/trees", body, "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 400);
  res = cli.Post("/api/v1/trees", {{kTreeKeyHeader, key}}, std::string(2 << 20, 'x'), "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 413);

  // Malformed query: 400 with the caret column.
  res = cli.Get(get_path("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY and and"));
  REQUIRE(res);
  CHECK(res->status == 400);
  auto err = json::parse(res->body);
  CHECK(err["error"] == "syntax");
  CHECK(err["column"] == 83);
  CHECK(err["line"] == 1);
  CHECK(err["caret"].get<std::string>().find(std::string(82, ' ') + "^") != std::string::npos);

  res = cli.Get(get_path("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:00) WHERE site_id=ANY"));
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body)["error"] == "semantic");

  res = cli.Get("/api/v1/query");
  REQUIRE(res);
  CHECK(res->status == 400);

  res = cli.Get(get_path("SELECT pop FROM (time 2019-04-01 00:00 to 2019-04-01 00:59) WHERE site_id=ANY") +
                "&timeout_ms=-1");
  REQUIRE(res);
  CHECK(res->status == 503);
  CHECK(json::parse(res->body)["error"] == "timeout");

  res = cli.Get("/api/v1/nowhere");
  REQUIRE(res);
  CHECK(res->status == 404);
  server.stop();
}

TEST_CASE("bench: every template runs in both modes, cold and hot") {
  auto& s = shared_store();
  BenchOptions bo;
  bo.repetitions = 2;
  const auto results = run_bench(*s.db, bo);
  CHECK(results.size() == benchmark_suite().size() * 2 * 2);
  for (const auto& r : results) {
    CHECK(r.min_ms <= r.median_ms);
    CHECK(r.median_ms <= r.max_ms);
    CHECK(r.repetitions == 2);
    CHECK(r.trees > 0);
  }
  const auto csv = bench_csv(results);
  CHECK(csv.rfind("benchmark,granularity,cache,", 0) == 0);
  CHECK(csv.find("# speedup aggregate 1d") != std::string::npos);
  for (const auto& t : benchmark_suite()) {
    CHECK_NOTHROW(flowql::parse(instantiate(t, "2019-04-01", "ITR")));
    CHECK(instantiate(t, "2019-04-01", "7").find("{") == std::string::npos);
  }
  bo.only = {"nope"};
  CHECK_THROWS_AS(run_bench(*s.db, bo), InvalidArgument);
  testsupport::TempDir empty;
  FlowDB none(empty.path());
  CHECK_THROWS_AS(run_bench(none, {}), InvalidArgument);
}
