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
// HTTP API over a store. Requests are handled concurrently on a worker
// pool; queries only read the store, tree uploads go through FlowDB::put.
//
//   GET  /api/v1/query?q=...        rows as JSON lines, or a JSON array
//                                   when Accept asks for application/json
//   GET  /api/v1/explain?q=...      plan
//   POST /api/v1/trees              serialized tree, key in X-Tree-Key
//   GET  /api/v1/trees/<key>        serialized tree
//   GET  /api/v1/sites              known site ids
//   GET  /api/v1/meta               inventory and store statistics

#pragma once

#include <memory>
#include <string>

#include "flowtree/service/config.hpp"

namespace flowtree {
class FlowDB;
}

namespace flowtree::service {

/// Header naming the TreeKey of an uploaded tree, e.g. `3-DP-15m-1554076800`.
inline constexpr const char* kTreeKeyHeader = "X-Tree-Key";

class HttpServer {
 public:
  HttpServer(FlowDB& db, ServerConfig cfg);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the configured endpoint; port 0 picks a free port. Returns the
  /// bound port. Throws StorageError when binding fails.
  int bind();
  /// Serves until stop(); binds first if needed.
  void listen();
  /// Serves on a background thread and returns once ready.
  void start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flowtree::service
