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

#include "flowtree/flowql/ast.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace flowtree::flowql {

std::string_view to_string(SelectKind k) {
  switch (k) {
    case SelectKind::kPop: return "pop";
    case SelectKind::kTop: return "top";
    case SelectKind::kHhh: return "hhh";
    case SelectKind::kHc: return "hc";
    case SelectKind::kAbove: return "above";
    case SelectKind::kStar: return "*";
  }
  return "?";
}

std::string_view to_string(Field f) {
  switch (f) {
    case Field::kSiteId: return "site_id";
    case Field::kSrcIp: return "src_ip";
    case Field::kDstIp: return "dst_ip";
    case Field::kSrcPort: return "src_port";
    case Field::kDstPort: return "dst_port";
    case Field::kProto: return "proto";
  }
  return "?";
}

std::optional<Field> parse_field(std::string_view name) {
  for (Field f : {Field::kSiteId, Field::kSrcIp, Field::kDstIp, Field::kSrcPort, Field::kDstPort,
                  Field::kProto}) {
    const auto want = to_string(f);
    if (name.size() == want.size() &&
        std::equal(name.begin(), name.end(), want.begin(),
                   [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) == b; })) {
      return f;
    }
  }
  return std::nullopt;
}

std::optional<Feature> feature_of(Field f) {
  switch (f) {
    case Field::kSrcIp: return Feature::kSrcIp;
    case Field::kDstIp: return Feature::kDstIp;
    case Field::kSrcPort: return Feature::kSrcPort;
    case Field::kDstPort: return Feature::kDstPort;
    case Field::kSiteId:
    case Field::kProto: return std::nullopt;
  }
  return std::nullopt;
}

std::string format_minute(std::uint64_t epoch) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{static_cast<std::int64_t>(epoch)}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
  return buf;
}

std::string render(const Atom& a) {
  std::string out(to_string(a.field));
  out += '=';
  if (a.any) return out + "ANY";
  if (a.field == Field::kSiteId) {
    if (a.iterate && a.ranged) return out + "ITR-" + std::to_string(a.value) + "|" + std::to_string(a.mask);
    if (a.iterate) return out + "ITR";
    return out + std::to_string(a.value);
  }
  if (a.field == Field::kProto) return out + std::to_string(a.value);
  return out + format_value(*feature_of(a.field), a.value, a.mask);
}

namespace {

void render_into(const Expr& e, std::string& out, bool nested) {
  if (e.kind == Expr::Kind::kAtom) {
    out += render(e.atom);
    return;
  }
  const bool paren = nested;
  if (paren) out += '(';
  const char* sep = e.kind == Expr::Kind::kAnd ? " and " : " or ";
  for (std::size_t i = 0; i < e.children.size(); ++i) {
    if (i) out += sep;
    const auto& c = e.children[i];
    // An `and` inside `or` binds tighter and needs no parentheses; anything
    // else that is compound is parenthesized to keep the tree shape.
    const bool child_nested = c.kind != Expr::Kind::kAtom &&
                              !(e.kind == Expr::Kind::kOr && c.kind == Expr::Kind::kAnd);
    render_into(c, out, child_nested);
  }
  if (paren) out += ')';
}

std::string format_percent(double p) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p);
  return std::string(buf, ec == std::errc{} ? end : buf);
}

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out, false);
  return out;
}

std::string render(const Query& q) {
  std::string out = "SELECT ";
  const Select& s = q.select;
  out += to_string(s.kind);
  std::vector<std::string> args;
  if (s.count) args.push_back(std::to_string(*s.count));
  if (s.percent) args.push_back(format_percent(*s.percent));
  args.emplace_back(s.proto == ProtoScope::kAny ? "any" : s.proto == ProtoScope::kTcp ? "tcp" : "udp");
  args.emplace_back(s.counter == Counter::kFlows ? "flow" : s.counter == Counter::kPackets ? "packet" : "byte");
  if (s.bin_minutes) args.push_back("bin" + std::to_string(*s.bin_minutes));
  out += '(';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ',';
    out += args[i];
  }
  out += ") FROM ";
  for (const auto& r : q.ranges) {
    out += "(time " + format_minute(r.from) + " to " + format_minute(r.written_to()) + ")";
  }
  out += " WHERE ";
  out += render(q.where);
  return out;
}

}  // namespace flowtree::flowql
