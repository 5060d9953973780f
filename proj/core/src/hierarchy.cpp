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

#include "flowtree/hierarchy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "flowtree/errors.hpp"

namespace flowtree {

struct FeatureSetTable {
  std::array<FeatureSet, kFeatureSetCount> sets;

  FeatureSetTable()
      : sets{{
            {FeatureSetId::kSI, "SI", {Feature::kSrcIp}, 1},
            {FeatureSetId::kDI, "DI", {Feature::kDstIp}, 1},
            {FeatureSetId::kSP, "SP", {Feature::kSrcPort}, 1},
            {FeatureSetId::kDP, "DP", {Feature::kDstPort}, 1},
            {FeatureSetId::kSIDI, "SIDI", {Feature::kSrcIp, Feature::kDstIp}, 2},
            {FeatureSetId::kSPDP, "SPDP", {Feature::kSrcPort, Feature::kDstPort}, 2},
            {FeatureSetId::kSISP, "SISP", {Feature::kSrcIp, Feature::kSrcPort}, 2},
            {FeatureSetId::kSIDP, "SIDP", {Feature::kSrcIp, Feature::kDstPort}, 2},
            {FeatureSetId::kDISP, "DISP", {Feature::kDstIp, Feature::kSrcPort}, 2},
            {FeatureSetId::kDIDP, "DIDP", {Feature::kDstIp, Feature::kDstPort}, 2},
            {FeatureSetId::kFull,
             "FULL",
             {Feature::kSrcIp, Feature::kDstIp, Feature::kSrcPort, Feature::kDstPort},
             4},
        }} {}
};

namespace {

const FeatureSetTable& table() {
  static const FeatureSetTable t;
  return t;
}

}  // namespace

FeatureSet::FeatureSet(FeatureSetId id, std::string_view name,
                       std::array<Feature, kMaxFeatures> features, std::size_t count)
    : id_(id), name_(name), features_(features), count_(count), depth_(0) {
  for (std::size_t i = 0; i < count_; ++i) {
    depth_ = std::max(depth_, feature_width(features_[i]));
  }
}

const FeatureSet& FeatureSet::get(FeatureSetId id) {
  const auto idx = static_cast<std::size_t>(id);
  if (idx >= kFeatureSetCount) throw InvalidArgument("unknown feature set id");
  return table().sets[idx];
}

std::optional<std::size_t> FeatureSet::slot_of(Feature f) const {
  for (std::size_t i = 0; i < count_; ++i) {
    if (features_[i] == f) return i;
  }
  return std::nullopt;
}

std::uint8_t FeatureSet::mask_at_level(std::size_t i, std::uint8_t level) const {
  const int w = width(i);
  const int m = w - (depth_ - level);
  return static_cast<std::uint8_t>(std::max(0, m));
}

const std::array<FeatureSetId, kFeatureSetCount>& all_feature_sets() {
  static const std::array<FeatureSetId, kFeatureSetCount> ids = {
      FeatureSetId::kSI,   FeatureSetId::kDI,   FeatureSetId::kSP,
      FeatureSetId::kDP,   FeatureSetId::kSIDI, FeatureSetId::kSPDP,
      FeatureSetId::kSISP, FeatureSetId::kSIDP, FeatureSetId::kDISP,
      FeatureSetId::kDIDP, FeatureSetId::kFull,
  };
  return ids;
}

std::string_view to_string(FeatureSetId id) { return FeatureSet::get(id).name(); }

std::optional<FeatureSetId> parse_feature_set(std::string_view name) {
  for (FeatureSetId id : all_feature_sets()) {
    const std::string_view n = FeatureSet::get(id).name();
    if (n.size() == name.size() &&
        std::equal(n.begin(), n.end(), name.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return id;
    }
  }
  return std::nullopt;
}

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::kSrcIp: return "src_ip";
    case Feature::kDstIp: return "dst_ip";
    case Feature::kSrcPort: return "src_port";
    case Feature::kDstPort: return "dst_port";
    case Feature::kProto: return "proto";
  }
  return "?";
}

std::optional<Feature> parse_feature(std::string_view name) {
  for (Feature f : {Feature::kSrcIp, Feature::kDstIp, Feature::kSrcPort,
                    Feature::kDstPort, Feature::kProto}) {
    if (feature_name(f) == name) return f;
  }
  return std::nullopt;
}

FeatureSetId covering_feature_set(std::span<const bool, 4> wanted) {
  const bool si = wanted[0], di = wanted[1], sp = wanted[2], dp = wanted[3];
  const int n = si + di + sp + dp;
  if (n >= 3) return FeatureSetId::kFull;
  if (n == 2) {
    if (si && di) return FeatureSetId::kSIDI;
    if (sp && dp) return FeatureSetId::kSPDP;
    if (si && sp) return FeatureSetId::kSISP;
    if (si && dp) return FeatureSetId::kSIDP;
    if (di && sp) return FeatureSetId::kDISP;
    return FeatureSetId::kDIDP;
  }
  if (di) return FeatureSetId::kDI;
  if (sp) return FeatureSetId::kSP;
  if (dp) return FeatureSetId::kDP;
  return FeatureSetId::kSI;
}

std::strong_ordering compare_lex(const FlowKey& a, const FlowKey& b) {
  if (auto c = a.feature_set <=> b.feature_set; c != 0) return c;
  for (std::size_t i = 0; i < kMaxFeatures; ++i) {
    if (auto c = a.values[i] <=> b.values[i]; c != 0) return c;
    if (auto c = a.masks[i] <=> b.masks[i]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

FlowKey canonicalize(const FlowKey& key) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  FlowKey out = key;
  for (std::size_t i = 0; i < kMaxFeatures; ++i) {
    if (i >= fs.size()) {
      if (key.masks[i] != 0 || key.values[i] != 0) {
        throw InvalidMask("key sets a slot outside its feature set");
      }
      continue;
    }
    if (key.masks[i] > fs.width(i)) {
      throw InvalidMask("mask " + std::to_string(key.masks[i]) + " exceeds width of " +
                        std::string(feature_name(fs.features()[i])));
    }
    out.values[i] = prefix_of(key.values[i], key.masks[i], fs.width(i));
  }
  return out;
}

bool is_canonical(const FlowKey& key) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  for (std::size_t i = 0; i < kMaxFeatures; ++i) {
    if (i >= fs.size()) {
      if (key.masks[i] != 0 || key.values[i] != 0) return false;
      continue;
    }
    if (key.masks[i] > fs.width(i)) return false;
    if (prefix_of(key.values[i], key.masks[i], fs.width(i)) != key.values[i]) return false;
  }
  return true;
}

FlowKey next_parent(const FlowKey& key) {
  if (key.is_root()) throw NoParent("the root key has no parent");
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  FlowKey out = key;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (out.masks[i] > 0) --out.masks[i];
    out.values[i] = prefix_of(out.values[i], out.masks[i], fs.width(i));
  }
  return out;
}

bool is_ancestor(const FlowKey& a, const FlowKey& b, AncestorMode mode) {
  if (a.feature_set != b.feature_set) {
    throw FeatureSetMismatch("is_ancestor over keys of " + std::string(to_string(a.feature_set)) +
                             " and " + std::string(to_string(b.feature_set)));
  }
  const FeatureSet& fs = FeatureSet::get(a.feature_set);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (a.masks[i] > b.masks[i]) return false;
    if (prefix_of(b.values[i], a.masks[i], fs.width(i)) != a.values[i]) return false;
  }
  return mode == AncestorMode::kOrEqual || !(a == b);
}

bool is_disjoint(const FlowKey& a, const FlowKey& b) {
  const FeatureSet& fs = FeatureSet::get(a.feature_set);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const std::uint8_t m = std::min(a.masks[i], b.masks[i]);
    if (prefix_of(a.values[i], m, fs.width(i)) != prefix_of(b.values[i], m, fs.width(i))) {
      return true;
    }
  }
  return false;
}

FlowKey key_from_flow(const FlowRecord& flow, FeatureSetId id) {
  const FeatureSet& fs = FeatureSet::get(id);
  FlowKey k = FlowKey::root(id);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    switch (fs.features()[i]) {
      case Feature::kSrcIp: k.values[i] = flow.src_ip; break;
      case Feature::kDstIp: k.values[i] = flow.dst_ip; break;
      case Feature::kSrcPort: k.values[i] = flow.src_port; break;
      case Feature::kDstPort: k.values[i] = flow.dst_port; break;
      case Feature::kProto: k.values[i] = flow.proto; break;
    }
    k.masks[i] = fs.width(i);
  }
  return k;
}

std::optional<std::uint8_t> level_of(const FlowKey& key) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  if (key.is_root()) return 0;
  int level = -1;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (key.masks[i] == 0) continue;
    const int l = key.masks[i] + fs.depth() - fs.width(i);
    if (level >= 0 && l != level) return std::nullopt;
    level = l;
  }
  if (level < 0 || level > fs.depth()) return std::nullopt;
  // Zero-mask slots must be saturated at this level.
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (key.masks[i] != fs.mask_at_level(i, static_cast<std::uint8_t>(level))) {
      return std::nullopt;
    }
  }
  return static_cast<std::uint8_t>(level);
}

std::uint8_t deepest_covering_level(const FlowKey& key) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  int level = fs.depth();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    level = std::min(level, key.masks[i] + fs.depth() - fs.width(i));
  }
  return static_cast<std::uint8_t>(std::max(0, level));
}

FlowKey truncate_to_level(const FlowKey& key, std::uint8_t level) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  FlowKey out = FlowKey::root(key.feature_set);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    out.masks[i] = fs.mask_at_level(i, level);
    out.values[i] = prefix_of(key.values[i], out.masks[i], fs.width(i));
  }
  return out;
}

std::string format_ipv4(std::uint32_t ip) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (ip >> 24) & 0xFF, (ip >> 16) & 0xFF,
                (ip >> 8) & 0xFF, ip & 0xFF);
  return buf;
}

namespace {

template <typename T>
std::optional<T> parse_uint(std::string_view text) {
  T v{};
  if (text.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t ip = 0;
  for (int octet = 0; octet < 4; ++octet) {
    const auto dot = text.find('.');
    const std::string_view part = octet < 3 ? text.substr(0, dot) : text;
    if (octet < 3 && dot == std::string_view::npos) return std::nullopt;
    auto v = parse_uint<std::uint32_t>(part);
    if (!v || *v > 255 || part.size() > 3) return std::nullopt;
    ip = (ip << 8) | *v;
    if (octet < 3) text.remove_prefix(dot + 1);
  }
  return ip;
}

std::string format_value(Feature f, std::uint32_t value, std::uint8_t mask) {
  if (mask == 0) return "ANY";
  std::string v = (f == Feature::kSrcIp || f == Feature::kDstIp) ? format_ipv4(value)
                                                                 : std::to_string(value);
  return v + "|" + std::to_string(mask);
}

std::pair<std::uint32_t, std::uint8_t> parse_value(Feature f, std::string_view text) {
  if (iequals(text, "ANY")) return {0, 0};
  const std::uint8_t width = feature_width(f);
  std::string_view value_text = text;
  std::uint8_t mask = width;
  if (const auto bar = text.find('|'); bar != std::string_view::npos) {
    value_text = text.substr(0, bar);
    auto m = parse_uint<unsigned>(text.substr(bar + 1));
    if (!m || *m > width) {
      throw InvalidKey("bad mask in '" + std::string(text) + "'");
    }
    mask = static_cast<std::uint8_t>(*m);
  }
  std::uint32_t value = 0;
  if (f == Feature::kSrcIp || f == Feature::kDstIp) {
    auto ip = parse_ipv4(value_text);
    if (!ip) throw InvalidKey("bad IPv4 address '" + std::string(value_text) + "'");
    value = *ip;
  } else {
    auto v = parse_uint<std::uint32_t>(value_text);
    if (!v || (width < 32 && *v >> width != 0)) {
      throw InvalidKey("bad " + std::string(feature_name(f)) + " value '" +
                       std::string(value_text) + "'");
    }
    value = *v;
  }
  return {prefix_of(value, mask, width), mask};
}

std::string to_string(const FlowKey& key) {
  const FeatureSet& fs = FeatureSet::get(key.feature_set);
  std::string out;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (i) out += ' ';
    out += feature_name(fs.features()[i]);
    out += '=';
    out += format_value(fs.features()[i], key.values[i], key.masks[i]);
  }
  return out;
}

FlowKey parse_key(FeatureSetId id, std::string_view text) {
  const FeatureSet& fs = FeatureSet::get(id);
  FlowKey key = FlowKey::root(id);
  while (!text.empty()) {
    const auto sp = text.find(' ');
    std::string_view item = text.substr(0, sp);
    text = sp == std::string_view::npos ? std::string_view{} : text.substr(sp + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InvalidKey("expected feature=value, got '" + std::string(item) + "'");
    auto f = parse_feature(item.substr(0, eq));
    if (!f) throw InvalidKey("unknown feature '" + std::string(item.substr(0, eq)) + "'");
    auto slot = fs.slot_of(*f);
    if (!slot) {
      throw InvalidKey(std::string(feature_name(*f)) + " is not part of " + std::string(fs.name()));
    }
    auto [v, m] = parse_value(*f, item.substr(eq + 1));
    key.values[*slot] = v;
    key.masks[*slot] = m;
  }
  return key;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidMask: return "InvalidMask";
    case ErrorCode::kInvalidKey: return "InvalidKey";
    case ErrorCode::kNoParent: return "NoParent";
    case ErrorCode::kFeatureSetMismatch: return "FeatureSetMismatch";
    case ErrorCode::kRootDeletion: return "RootDeletion";
    case ErrorCode::kKeyNotFound: return "KeyNotFound";
    case ErrorCode::kCounterOverflow: return "CounterOverflow";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDecode: return "DecodeError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIngestQuality: return "IngestQualityError";
    case ErrorCode::kWindow: return "WindowError";
    case ErrorCode::kKeyMismatch: return "KeyMismatch";
    case ErrorCode::kStorage: return "StorageError";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kSyntax: return "SyntaxError";
    case ErrorCode::kSemantic: return "SemanticError";
  }
  return "Unknown";
}

std::string_view to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::kBadMagic: return "BadMagic";
    case DecodeErrorKind::kBadVersion: return "BadVersion";
    case DecodeErrorKind::kTruncated: return "Truncated";
    case DecodeErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case DecodeErrorKind::kMalformed: return "Malformed";
  }
  return "Unknown";
}

}  // namespace flowtree
