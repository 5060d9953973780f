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

// Syntax tree of a query. Every node compares by value so that a rendered
// query can be checked to reparse into an identical tree.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowtree/counters.hpp"
#include "flowtree/hierarchy.hpp"

namespace flowtree::flowql {

enum class SelectKind : std::uint8_t { kPop, kTop, kHhh, kHc, kAbove, kStar };

/// Protocol scope argument. Stored trees carry no protocol feature, so only
/// kAny is executable.
enum class ProtoScope : std::uint8_t { kAny, kTcp, kUdp };

struct Select {
  SelectKind kind = SelectKind::kPop;
  /// K for top/hc, T for above.
  std::optional<std::uint64_t> count;
  /// Percent of the evaluated tree's total for hhh; 0 < P < 100.
  std::optional<double> percent;
  Counter counter = Counter::kFlows;
  ProtoScope proto = ProtoScope::kAny;
  /// Drill-down bin width in minutes.
  std::optional<std::uint32_t> bin_minutes;

  friend bool operator==(const Select&, const Select&) = default;
};

/// Half-open [from, to) in epoch seconds (UTC). The written end minute is
/// inclusive, so `00:00 to 23:59` covers the whole day.
struct TimeRange {
  std::uint64_t from = 0;
  std::uint64_t to = 0;

  std::uint64_t written_to() const { return to - 60; }
  friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

enum class Field : std::uint8_t { kSiteId, kSrcIp, kDstIp, kSrcPort, kDstPort, kProto };

/// `feature=value`. For flow features `value|mask` is a prefix (mask 0 is
/// ANY). For site_id the value is a site id unless `iterate` or `any`.
struct Atom {
  Field field = Field::kSiteId;
  std::uint32_t value = 0;
  std::uint8_t mask = 0;
  bool any = false;
  /// site_id=ITR, optionally restricted to [value, value + 2^mask - 1]
  /// when `ranged`.
  bool iterate = false;
  bool ranged = false;

  friend bool operator==(const Atom&, const Atom&) = default;
  friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Expr {
  enum class Kind : std::uint8_t { kAtom, kAnd, kOr } kind = Kind::kAtom;
  Atom atom;
  std::vector<Expr> children;

  static Expr leaf(Atom a) { return Expr{Kind::kAtom, a, {}}; }
  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Query {
  Select select;
  std::vector<TimeRange> ranges;
  Expr where;

  friend bool operator==(const Query&, const Query&) = default;
};

std::string_view to_string(SelectKind k);
std::string_view to_string(Field f);
std::optional<Field> parse_field(std::string_view name);
/// Flow feature behind a field; nullopt for site_id and proto.
std::optional<Feature> feature_of(Field f);

/// Canonical query text; parse(render(q)) == q.
std::string render(const Query& q);
std::string render(const Expr& e);
std::string render(const Atom& a);

/// `YYYY-MM-DD hh:mm` in UTC.
std::string format_minute(std::uint64_t epoch);

}  // namespace flowtree::flowql
