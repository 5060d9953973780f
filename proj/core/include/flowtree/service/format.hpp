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
// Rendering of query results and query errors for terminals and machines.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "flowtree/errors.hpp"
#include "flowtree/flowql/execute.hpp"

namespace flowtree::service {

enum class OutputFormat { kTable, kCsv, kJsonLines, kJsonArray };

std::optional<OutputFormat> parse_format(std::string_view name);
std::string_view to_string(OutputFormat f);

struct FormatOptions {
  /// Append plan and execution wall time.
  bool timing = false;
};

/// Table output ends with a footer line; CSV has a header row; JSON lines
/// emit one object per row followed by a trailing `{"meta": ...}` line; a
/// JSON array holds the row objects only.
std::string format_result(const flowql::ResultTable& t, OutputFormat f, const FormatOptions& opts = {});

/// Timing, counts and warnings as one JSON object.
std::string result_meta_json(const flowql::ResultTable& t);

/// The offending line of `query` with a caret under the error column,
/// followed by the message.
std::string caret_message(std::string_view query, const SyntaxError& e);

}  // namespace flowtree::service
