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
// flowctl: ingest flow files, build rollups, query and serve a store.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowtree/corpus.hpp"
#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/pipeline.hpp"
#include "flowtree/service/bench.hpp"
#include "flowtree/service/config.hpp"
#include "flowtree/service/format.hpp"
#include "flowtree/service/http.hpp"
#include "flowtree/service/shell.hpp"

#include <unistd.h>

namespace fs = std::filesystem;
using namespace flowtree;
using namespace flowtree::service;

namespace {

struct GlobalFlags {
  std::optional<std::string> store;
  std::optional<std::string> listen;
  std::optional<std::size_t> cache_trees;
  std::optional<std::size_t> workers;
  std::optional<std::string> config;
};

/// Defaults, then the config file, then the environment, then flags.
ServerConfig resolve_config(const GlobalFlags& g) {
  ServerConfig cfg;
  if (g.config) apply_config_file(cfg, *g.config);
  if (const char* env = std::getenv(kStoreEnvVar); env && *env && !g.store) cfg.store = env;
  if (g.store) cfg.store = *g.store;
  if (g.listen) cfg.set("listen", *g.listen);
  if (g.cache_trees) cfg.cache_trees = *g.cache_trees;
  if (g.workers) cfg.set("workers", std::to_string(*g.workers));
  cfg.normalize();
  return cfg;
}

std::vector<Granularity> parse_granularities(const std::vector<std::string>& names) {
  std::vector<Granularity> out;
  for (const auto& n : names) {
    auto g = parse_granularity(n);
    if (!g) throw InvalidArgument("unknown granularity " + n);
    out.push_back(*g);
  }
  return out;
}

RollupOptions rollup_options(const ServerConfig& cfg) {
  RollupOptions ro;
  ro.targets = cfg.rollups;
  ro.feature_sets = cfg.feature_sets;
  ro.max_nodes = cfg.max_nodes;
  ro.workers = cfg.workers;
  return ro;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flowtree store, query and serving tool"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--store", g.store, std::string("Store root (default: $") + kStoreEnvVar + " or ./flowtree-store)");
  app.add_option("--listen", g.listen, "host:port for serve");
  app.add_option("--cache-trees", g.cache_trees, "Trees kept in the in-memory cache");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "key=value configuration file")->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Summarize flow or packet CSV files into the store");
  std::vector<std::string> inputs;
  bool no_dedup = false, then_rollup = false;
  ingest->add_option("inputs", inputs, "Input files (.csv or .csv.gz)")->required()->check(CLI::ExistingFile);
  ingest->add_flag("--no-dedup", no_dedup, "Re-ingest files seen before");
  ingest->add_flag("--rollup", then_rollup, "Build missing rollups afterwards");

  auto* rollup = app.add_subcommand("rollup", "Materialize coarser and all-sites trees");
  std::vector<std::string> rollup_targets;
  bool force = false;
  rollup->add_option("--granularities", rollup_targets, "Targets, e.g. 1h 1d")->delimiter(',');
  rollup->add_flag("--force", force, "Rebuild rollups that exist");

  auto* shell = app.add_subcommand("shell", "Interactive FlowQL shell");

  auto* query = app.add_subcommand("query", "Run one FlowQL query");
  std::string query_text, format_name = "table";
  bool timing = false, explain_only = false;
  query->add_option("-q,--query", query_text, "FlowQL text")->required();
  query->add_option("--format", format_name, "table, csv, json-lines or json")
      ->check(CLI::IsMember({"table", "csv", "json-lines", "jsonl", "json"}));
  query->add_flag("--timing", timing, "Print wall time");
  query->add_flag("--explain", explain_only, "Print the plan instead of executing");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");

  auto* bench = app.add_subcommand("bench", "Run the benchmark suite and print CSV");
  BenchOptions bo;
  std::vector<std::string> modes{"1d", "15m"};
  bench->add_option("--repetitions", bo.repetitions, "Runs per benchmark")->capture_default_str();
  bench->add_option("--date", bo.date, "Day to query (YYYY-MM-DD); default: first stored day");
  bench->add_option("--site", bo.site, "site_id value: ANY, ITR or an id")->capture_default_str();
  bench->add_option("--modes", modes, "Coarsest granularity per run")->delimiter(',')->capture_default_str();
  bench->add_option("--only", bo.only, "Benchmark names")->delimiter(',');

  auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic flow corpus as CSV");
  CorpusConfig cc;
  std::string out_path;
  double hours = 24;
  gen->add_option("-o,--out", out_path, "Output CSV path")->required();
  gen->add_option("--sites", cc.sites)->capture_default_str();
  gen->add_option("--flows-per-bin", cc.flows_per_bin, "Mean flows per site per 15 minutes")->capture_default_str();
  gen->add_option("--hours", hours, "Duration")->capture_default_str();
  gen->add_option("--seed", cc.seed)->capture_default_str();
  gen->add_flag("!--no-attack", cc.plant_attack, "Do not plant the NTP anomaly");
  std::optional<std::uint32_t> attack_site;
  gen->add_option("--attack-site", attack_site, "Site of the planted anomaly (default: 7, or the last site)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      cc.duration = static_cast<std::uint64_t>(hours * 3600);
      cc.attack_site = attack_site.value_or(std::min<std::uint32_t>(7, cc.first_site + cc.sites - 1));
      const auto corpus = generate_corpus(cc);
      std::ofstream out(out_path, std::ios::binary);
      if (!out) throw StorageError("cannot write " + out_path);
      out << to_flow_csv(corpus.records);
      if (!out) throw StorageError("short write to " + out_path);
      std::cerr << "records=" << corpus.records.size() << " flows=" << corpus.truth.total.flows
                << " packets=" << corpus.truth.total.packets << " bytes=" << corpus.truth.total.bytes
                << " sites=" << cc.sites << '\n';
      return 0;
    }

    const ServerConfig cfg = resolve_config(g);
    FlowDB db(cfg.store, cfg.store_options());

    if (ingest->parsed()) {
      IngestOptions io;
      io.agg = cfg.agg_config();
      io.dedup = !no_dedup;
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      const auto s = ingest_files(db, paths, io);
      for (const auto& rep : s.inputs) std::cout << rep.to_string() << '\n';
      std::cout << s.to_string() << '\n';
      if (then_rollup) std::cout << build_rollups(db, rollup_options(cfg)).to_string() << '\n';
      return 0;
    }
    if (rollup->parsed()) {
      RollupOptions ro = rollup_options(cfg);
      if (!rollup_targets.empty()) ro.targets = parse_granularities(rollup_targets);
      ro.force = force;
      std::cout << build_rollups(db, ro).to_string() << '\n';
      return 0;
    }
    if (shell->parsed()) {
      ShellOptions so;
      so.exec.timeout = cfg.query_timeout;
      so.exec.workers = cfg.workers;
      Shell sh(db, std::cout, so);
      const bool tty = ::isatty(STDIN_FILENO) != 0;
      sh.run(std::cin, tty);
      return 0;
    }
    if (query->parsed()) {
      ShellOptions so;
      so.format = *parse_format(format_name);
      so.timing = timing;
      so.exec.timeout = cfg.query_timeout;
      so.exec.workers = cfg.workers;
      Shell sh(db, std::cout, so);
      return (explain_only ? sh.explain(query_text) : sh.execute(query_text)) ? 0 : 2;
    }
    if (serve->parsed()) {
      HttpServer server(db, cfg);
      const int port = server.bind();
      std::cerr << "serving " << cfg.store.string() << " on port " << port << '\n';
      server.listen();
      return 0;
    }
    if (bench->parsed()) {
      bo.modes = parse_granularities(modes);
      bo.exec.timeout = cfg.query_timeout;
      std::cout << bench_csv(run_bench(db, bo));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "flowctl: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "flowctl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
