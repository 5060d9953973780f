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
#include "flowtree/service/http.hpp"

#include <charconv>
#include <chrono>
#include <string_view>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/flowql/execute.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/flowql/plan.hpp"
#include "flowtree/serialize.hpp"
#include "flowtree/service/format.hpp"
#include "json_rows.hpp"

namespace flowtree::service {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message,
                json extra = json::object()) {
  extra["error"] = kind;
  extra["message"] = message;
  send_json(res, status, extra);
}

/// Maps library errors onto 4xx/5xx JSON responses.
template <typename F>
void guarded(httplib::Response& res, std::string_view query, F&& f) {
  try {
    f();
  } catch (const SyntaxError& e) {
    send_error(res, 400, "syntax", e.what(),
               {{"line", e.line()}, {"column", e.column()}, {"token", e.token()},
                {"caret", caret_message(query, e)}});
  } catch (const SemanticError& e) {
    send_error(res, 400, "semantic", e.what());
  } catch (const NotFound& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const DecodeError& e) {
    send_error(res, 400, "decode", e.what());
  } catch (const KeyMismatch& e) {
    send_error(res, 400, "key_mismatch", e.what());
  } catch (const InvalidArgument& e) {
    send_error(res, 400, "invalid_argument", e.what());
  } catch (const Error& e) {
    send_error(res, 500, to_string(e.code()), e.what());
  }
}

json granularity_list(const std::set<Granularity>& gs) {
  json out = json::array();
  for (Granularity g : gs) out.push_back(std::string(to_string(g)));
  return out;
}

json bucket_json(const StoreStats::Bucket& b) { return {{"trees", b.trees}, {"bytes", b.bytes}}; }

}  // namespace

struct HttpServer::Impl {
  FlowDB& db;
  ServerConfig cfg;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(FlowDB& d, ServerConfig c) : db(d), cfg(std::move(c)) {
    const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
    server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
    server.set_payload_max_length(cfg.max_body_bytes);
    routes();
  }

  flowql::ExecOptions exec_options(const httplib::Request& req) const {
    flowql::ExecOptions eo;
    eo.timeout = cfg.query_timeout;
    if (req.has_param("timeout_ms")) {
      const std::string v = req.get_param_value("timeout_ms");
      long long ms = 0;
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), ms);
      if (ec != std::errc{} || p != v.data() + v.size()) throw InvalidArgument("timeout_ms must be an integer");
      eo.timeout = std::chrono::milliseconds(ms);
    }
    if (req.has_param("max_granularity")) {
      const auto g = parse_granularity(req.get_param_value("max_granularity"));
      if (!g) throw InvalidArgument("unknown granularity " + req.get_param_value("max_granularity"));
      eo.plan.max_granularity = *g;
    }
    return eo;
  }

  void query(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q")) return send_error(res, 400, "missing_query", "parameter q is required");
    const std::string q = req.get_param_value("q");
    guarded(res, q, [&] {
      const auto t0 = Clock::now();
      const auto eo = exec_options(req);
      const auto table = flowql::run(q, db, eo);
      const double wall = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      if (table.truncated) {
        return send_error(res, 503, "timeout",
                          "query exceeded its deadline of " + std::to_string(eo.timeout.count()) + " ms",
                          {{"meta", detail::meta_json(table)}});
      }
      res.set_header("X-Plan-Ms", std::to_string(table.plan_ms));
      res.set_header("X-Exec-Ms", std::to_string(table.exec_ms));
      res.set_header("X-Wall-Ms", std::to_string(wall));
      res.set_header("X-Row-Count", std::to_string(table.rows.size()));
      const std::string accept = req.get_header_value("Accept");
      if (accept.find("application/json") != std::string::npos) {
        res.set_content(format_result(table, OutputFormat::kJsonArray), "application/json");
      } else if (accept.find("text/csv") != std::string::npos) {
        res.set_content(format_result(table, OutputFormat::kCsv), "text/csv");
      } else {
        res.set_content(format_result(table, OutputFormat::kJsonLines), "application/x-ndjson");
      }
      res.status = 200;
    });
  }

  void explain(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q")) return send_error(res, 400, "missing_query", "parameter q is required");
    const std::string q = req.get_param_value("q");
    guarded(res, q, [&] {
      const auto eo = exec_options(req);
      const auto p = flowql::plan(flowql::parse(q), db, eo.plan);
      json minis = json::array();
      for (const auto& m : p.minis) {
        minis.push_back({{"feature_set", std::string(to_string(m.feature_set))},
                         {"key", to_string(m.key)}});
      }
      std::size_t fetches = 0;
      for (const auto& u : p.units) {
        for (const auto& in : u.inputs) fetches += in.keys.size();
      }
      send_json(res, 200,
                {{"query", flowql::render(p.query)},
                 {"mini_queries", minis},
                 {"units", p.units.size()},
                 {"trees", fetches},
                 {"warnings", p.warnings},
                 {"text", flowql::explain(p)}});
    });
  }

  void put_tree(const httplib::Request& req, httplib::Response& res) {
    guarded(res, "", [&] {
      const std::string key_text = req.get_header_value(kTreeKeyHeader);
      const auto key = parse_tree_key(key_text);
      if (!key) throw InvalidArgument("header " + std::string(kTreeKeyHeader) + " must hold a tree key");
      const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "merge";
      if (mode != "merge" && mode != "overwrite") throw InvalidArgument("mode must be merge or overwrite");
      const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
      const Flowtree tree = deserialize(std::span<const std::uint8_t>(data, req.body.size()));
      db.put(*key, tree, mode == "merge" ? PutMode::kMerge : PutMode::kOverwrite);
      send_json(res, 201, {{"key", to_string(*key)}, {"nodes", tree.size()}});
    });
  }

  void get_tree(const httplib::Request& req, httplib::Response& res) {
    guarded(res, "", [&] {
      const std::string text = req.matches[1];
      const auto key = parse_tree_key(text);
      if (!key) throw InvalidArgument("malformed tree key '" + text + "'");
      const auto bytes = db.get_bytes(*key);
      res.status = 200;
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    });
  }

  void sites(httplib::Response& res) {
    send_json(res, 200, {{"sites", db.sites()}});
  }

  void meta(httplib::Response& res) {
    json inventory = json::object();
    for (FeatureSetId fs : all_feature_sets()) {
      auto per_site = db.granularities(fs, false);
      auto all = db.granularities(fs, true);
      if (per_site.empty() && all.empty()) continue;
      inventory[std::string(to_string(fs))] = {{"sites", granularity_list(per_site)},
                                               {"all", granularity_list(all)}};
    }
    const auto st = db.stats();
    json by_gran = json::object();
    for (const auto& [g, b] : st.per_site_by_granularity) by_gran[std::string(to_string(g))] = bucket_json(b);
    json all_gran = json::object();
    for (const auto& [g, b] : st.all_sites_by_granularity) all_gran[std::string(to_string(g))] = bucket_json(b);
    json span = nullptr;
    if (auto s = db.time_span()) span = {{"from", s->first}, {"to", s->second}};
    send_json(res, 200,
              {{"sites", db.sites()},
               {"inventory", inventory},
               {"time_span", span},
               {"store",
                {{"total", bucket_json(st.total)},
                 {"per_site", by_gran},
                 {"all_sites", all_gran},
                 {"cache_hits", st.cache_hits},
                 {"cache_misses", st.cache_misses},
                 {"cached_trees", st.cached_trees}}}});
  }

  void routes() {
    server.Get("/api/v1/query", [this](const httplib::Request& q, httplib::Response& r) { query(q, r); });
    server.Get("/api/v1/explain", [this](const httplib::Request& q, httplib::Response& r) { explain(q, r); });
    server.Post("/api/v1/trees", [this](const httplib::Request& q, httplib::Response& r) { put_tree(q, r); });
    server.Get(R"(/api/v1/trees/([^/]+))",
               [this](const httplib::Request& q, httplib::Response& r) { get_tree(q, r); });
    server.Get("/api/v1/sites", [this](const httplib::Request&, httplib::Response& r) { sites(r); });
    server.Get("/api/v1/meta", [this](const httplib::Request&, httplib::Response& r) { meta(r); });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string kind = res.status == 413 ? "payload_too_large"
                               : res.status == 404 ? "not_found"
                                                   : "http_error";
      res.set_content(json{{"error", kind}, {"status", res.status}}.dump() + "\n", "application/json");
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json{{"error", "internal"}, {"message", message}}.dump() + "\n", "application/json");
    });
  }
};

HttpServer::HttpServer(FlowDB& db, ServerConfig cfg) : impl_(std::make_unique<Impl>(db, std::move(cfg))) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto [host, port] = impl_->cfg.listen_endpoint();
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    impl_->port = port;
  }
  if (impl_->port < 0) throw StorageError("cannot bind " + impl_->cfg.listen);
  return impl_->port;
}

void HttpServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpServer::port() const { return impl_->port; }

}  // namespace flowtree::service
