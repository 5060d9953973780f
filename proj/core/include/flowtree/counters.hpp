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

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

namespace flowtree {

enum class Counter : std::uint8_t { kFlows, kPackets, kBytes };

std::string_view to_string(Counter c);
std::optional<Counter> parse_counter(std::string_view name);

/// Flow, packet and byte counts. Arithmetic saturates at the 64-bit limit;
/// the checked helpers report whether saturation happened.
struct PopCounters {
  std::uint64_t flows = 0;
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;

  std::uint64_t get(Counter c) const {
    switch (c) {
      case Counter::kFlows: return flows;
      case Counter::kPackets: return packets;
      case Counter::kBytes: return bytes;
    }
    return 0;
  }

  bool is_zero() const { return flows == 0 && packets == 0 && bytes == 0; }

  /// Saturating add; returns false if any counter saturated.
  bool add_checked(const PopCounters& o) {
    bool ok = true;
    ok &= sat_add(flows, o.flows);
    ok &= sat_add(packets, o.packets);
    ok &= sat_add(bytes, o.bytes);
    return ok;
  }

  /// True iff adding `o` would saturate a counter.
  bool would_overflow(const PopCounters& o) const {
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    return flows > kMax - o.flows || packets > kMax - o.packets || bytes > kMax - o.bytes;
  }

  PopCounters& operator+=(const PopCounters& o) {
    add_checked(o);
    return *this;
  }

  /// Saturates at zero.
  PopCounters& operator-=(const PopCounters& o) {
    flows = flows > o.flows ? flows - o.flows : 0;
    packets = packets > o.packets ? packets - o.packets : 0;
    bytes = bytes > o.bytes ? bytes - o.bytes : 0;
    return *this;
  }

  friend PopCounters operator+(PopCounters a, const PopCounters& b) { return a += b; }
  friend PopCounters operator-(PopCounters a, const PopCounters& b) { return a -= b; }
  friend bool operator==(const PopCounters&, const PopCounters&) = default;

  /// Componentwise >=.
  bool dominates(const PopCounters& o) const {
    return flows >= o.flows && packets >= o.packets && bytes >= o.bytes;
  }

 private:
  static bool sat_add(std::uint64_t& a, std::uint64_t b) {
    if (a > std::numeric_limits<std::uint64_t>::max() - b) {
      a = std::numeric_limits<std::uint64_t>::max();
      return false;
    }
    a += b;
    return true;
  }
};

/// Componentwise |a - b|.
inline PopCounters abs_diff(const PopCounters& a, const PopCounters& b) {
  auto d = [](std::uint64_t x, std::uint64_t y) { return x > y ? x - y : y - x; };
  return {d(a.flows, b.flows), d(a.packets, b.packets), d(a.bytes, b.bytes)};
}

}  // namespace flowtree
