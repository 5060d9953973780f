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
// JSON encodings shared by the formatters and the HTTP API.

#pragma once

#include <nlohmann/json.hpp>

#include "flowtree/flowql/execute.hpp"
#include "flowtree/flowql/ast.hpp"

namespace flowtree::service::detail {

inline nlohmann::json row_json(const flowql::Row& r) {
  return {{"bin_start", r.bin_start},
          {"bin_end", r.bin_end},
          {"bin", flowql::format_minute(r.bin_start)},
          {"site", r.site_label},
          {"feature_set", std::string(to_string(r.key.feature_set))},
          {"key", to_string(r.key)},
          {"flows", r.counters.flows},
          {"packets", r.counters.packets},
          {"bytes", r.counters.bytes},
          {"score", r.score},
          {"exact", r.exact},
          {"partial", r.partial}};
}

inline nlohmann::json meta_json(const flowql::ResultTable& t) {
  return {{"kind", std::string(flowql::to_string(t.kind))},
          {"counter", std::string(to_string(t.counter))},
          {"rows", t.rows.size()},
          {"plan_ms", t.plan_ms},
          {"exec_ms", t.exec_ms},
          {"trees_fetched", t.trees_fetched},
          {"merges", t.merges},
          {"truncated", t.truncated},
          {"warnings", t.warnings}};
}

}  // namespace flowtree::service::detail
