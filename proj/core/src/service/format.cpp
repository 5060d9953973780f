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
#include "flowtree/service/format.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowtree/flowql/ast.hpp"
#include "json_rows.hpp"

namespace flowtree::service {

namespace {

using flowql::ResultTable;
using flowql::Row;

std::string interval_text(const Row& r) {
  return flowql::format_minute(r.bin_start) + " to " + flowql::format_minute(r.bin_end - 60);
}

std::string key_text(const Row& r) {
  std::string s = to_string(r.key);
  return s.empty() ? "*" : s;
}

std::string ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<std::vector<std::string>> cells(const ResultTable& t) {
  std::vector<std::vector<std::string>> out;
  for (const Row& r : t.rows) {
    out.push_back({interval_text(r), r.site_label, std::string(to_string(r.key.feature_set)), key_text(r),
                   std::to_string(r.counters.flows), std::to_string(r.counters.packets),
                   std::to_string(r.counters.bytes), std::to_string(r.score), r.exact ? "yes" : "no",
                   r.partial ? "yes" : "no"});
  }
  return out;
}

const std::vector<std::string>& headers() {
  static const std::vector<std::string> h{"bin",   "site",  "fs",    "key",   "flows",
                                          "packets", "bytes", "score", "exact", "partial"};
  return h;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string table(const ResultTable& t, const FormatOptions& opts) {
  const auto rows = cells(t);
  const auto& h = headers();
  std::vector<std::size_t> width(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) width[i] = h[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  // Numeric columns are right-aligned.
  auto numeric = [](std::size_t i) { return i >= 4 && i <= 7; };
  std::ostringstream o;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string pad(width[i] - r[i].size(), ' ');
      if (i) o << "  ";
      o << (numeric(i) ? pad + r[i] : (i + 1 == r.size() ? r[i] : r[i] + pad));
    }
    o << '\n';
  };
  line(h);
  std::vector<std::string> rule;
  for (std::size_t wd : width) rule.emplace_back(wd, '-');
  line(rule);
  for (const auto& r : rows) line(r);
  for (const auto& w : t.warnings) o << "warning: " << w << '\n';
  o << t.rows.size() << (t.rows.size() == 1 ? " row" : " rows");
  if (t.truncated) o << " (truncated at deadline)";
  if (opts.timing) {
    o << " in " << ms(t.plan_ms + t.exec_ms) << " ms (plan " << ms(t.plan_ms) << " ms, exec "
      << ms(t.exec_ms) << " ms, " << t.trees_fetched << " trees)";
  }
  o << '\n';
  return o.str();
}

std::string csv(const ResultTable& t, const FormatOptions& opts) {
  std::ostringstream o;
  const auto& h = headers();
  o << "bin_start,bin_end";
  for (std::size_t i = 1; i < h.size(); ++i) o << ',' << h[i];
  o << '\n';
  for (const Row& r : t.rows) {
    o << flowql::format_minute(r.bin_start) << ',' << flowql::format_minute(r.bin_end - 60) << ','
      << csv_field(r.site_label) << ',' << to_string(r.key.feature_set) << ','
      << csv_field(key_text(r)) << ',' << r.counters.flows << ',' << r.counters.packets << ','
      << r.counters.bytes << ',' << r.score << ',' << (r.exact ? 1 : 0) << ','
      << (r.partial ? 1 : 0) << '\n';
  }
  if (opts.timing) o << "# plan_ms=" << ms(t.plan_ms) << " exec_ms=" << ms(t.exec_ms) << '\n';
  return o.str();
}

}  // namespace

std::optional<OutputFormat> parse_format(std::string_view name) {
  if (name == "table") return OutputFormat::kTable;
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json-lines" || name == "jsonl") return OutputFormat::kJsonLines;
  if (name == "json") return OutputFormat::kJsonArray;
  return std::nullopt;
}

std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::kTable: return "table";
    case OutputFormat::kCsv: return "csv";
    case OutputFormat::kJsonLines: return "json-lines";
    case OutputFormat::kJsonArray: return "json";
  }
  return "table";
}

std::string result_meta_json(const ResultTable& t) { return detail::meta_json(t).dump(); }

std::string format_result(const ResultTable& t, OutputFormat f, const FormatOptions& opts) {
  switch (f) {
    case OutputFormat::kTable: return table(t, opts);
    case OutputFormat::kCsv: return csv(t, opts);
    case OutputFormat::kJsonLines: {
      std::string out;
      for (const Row& r : t.rows) out += detail::row_json(r).dump() + '\n';
      out += nlohmann::json{{"meta", detail::meta_json(t)}}.dump() + '\n';
      return out;
    }
    case OutputFormat::kJsonArray: {
      nlohmann::json arr = nlohmann::json::array();
      for (const Row& r : t.rows) arr.push_back(detail::row_json(r));
      return arr.dump() + '\n';
    }
  }
  return {};
}

std::string caret_message(std::string_view query, const SyntaxError& e) {
  std::string_view line = query;
  for (std::size_t l = 1; l < e.line(); ++l) {
    const auto nl = line.find('\n');
    if (nl == std::string_view::npos) break;
    line.remove_prefix(nl + 1);
  }
  line = line.substr(0, line.find('\n'));
  std::string out(line);
  out += '\n';
  out += std::string(e.column() > 0 ? e.column() - 1 : 0, ' ');
  out += "^\nsyntax error: ";
  out += e.what();
  return out;
}

}  // namespace flowtree::service
