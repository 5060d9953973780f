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

#include "flowtree/counters.hpp"

namespace flowtree {

std::string_view to_string(Counter c) {
  switch (c) {
    case Counter::kFlows: return "flows";
    case Counter::kPackets: return "packets";
    case Counter::kBytes: return "bytes";
  }
  return "?";
}

std::optional<Counter> parse_counter(std::string_view name) {
  if (name == "flows" || name == "flow") return Counter::kFlows;
  if (name == "packets" || name == "pkt" || name == "pkts") return Counter::kPackets;
  if (name == "bytes" || name == "byte") return Counter::kBytes;
  return std::nullopt;
}

}  // namespace flowtree
