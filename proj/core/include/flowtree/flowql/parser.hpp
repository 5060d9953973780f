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

#pragma once

#include <string_view>

#include "flowtree/flowql/ast.hpp"

namespace flowtree::flowql {

/// Parses one query. Throws SyntaxError with the 1-based line and column of
/// the offending token, or SemanticError for well-formed text that has no
/// meaning (empty range, hc without exactly two ranges, bin width that does
/// not divide a range, unknown feature, out-of-range arguments).
Query parse(std::string_view text);

/// Epoch seconds of `YYYY-MM-DD` + `hh:mm` (UTC); nullopt if invalid.
std::optional<std::uint64_t> parse_minute(std::string_view date, std::string_view time);

}  // namespace flowtree::flowql
