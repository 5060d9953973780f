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

#include "flowtree/serialize.hpp"

#include <zlib.h>

#include <cstring>
#include <string>

#include "flowtree/errors.hpp"

namespace flowtree {
namespace {

constexpr char kMagic[4] = {'F', 'T', 'R', '1'};

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get() {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::size_t record_size(const FeatureSet& fs) { return fs.size() * 5 + 24; }

std::uint32_t crc_of(std::span<const std::uint8_t> body) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), body.data(), static_cast<uInt>(body.size())));
}

[[noreturn]] void malformed(const std::string& what) {
  throw DecodeError(DecodeErrorKind::kMalformed, what);
}

}  // namespace

std::size_t encoded_size(const Flowtree& tree) {
  return kHeaderSize + tree.size() * record_size(FeatureSet::get(tree.feature_set()));
}

std::vector<std::uint8_t> serialize(const Flowtree& tree) {
  const FeatureSet& fs = FeatureSet::get(tree.feature_set());
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(tree));
  out.insert(out.end(), kMagic, kMagic + 4);
  Writer w(out);
  w.put<std::uint16_t>(kFormatVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(tree.feature_set()));
  w.put<std::uint8_t>(0);
  w.put<std::uint32_t>(tree.insert_probability_micros());
  w.put<std::uint32_t>(tree.max_nodes());
  w.put<std::uint64_t>(tree.seed());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tree.size()));
  w.put<std::uint64_t>(tree.total().flows);
  w.put<std::uint64_t>(tree.total().packets);
  w.put<std::uint64_t>(tree.total().bytes);
  const std::size_t crc_at = out.size();
  w.put<std::uint32_t>(0);
  for (const auto& [key, comp] : tree.entries()) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      w.put<std::uint32_t>(key.values[i]);
      w.put<std::uint8_t>(key.masks[i]);
    }
    w.put<std::uint64_t>(comp.flows);
    w.put<std::uint64_t>(comp.packets);
    w.put<std::uint64_t>(comp.bytes);
  }
  const std::uint32_t crc = crc_of(std::span(out).subspan(kHeaderSize));
  for (std::size_t i = 0; i < 4; ++i) out[crc_at + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  return out;
}

Flowtree deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() < 4) throw DecodeError(DecodeErrorKind::kTruncated, "input shorter than magic");
    throw DecodeError(DecodeErrorKind::kBadMagic, "not a flowtree encoding");
  }
  if (bytes.size() < kHeaderSize) throw DecodeError(DecodeErrorKind::kTruncated, "short header");
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion) {
    throw DecodeError(DecodeErrorKind::kBadVersion, "unsupported version " + std::to_string(version));
  }
  const auto fs_raw = r.get<std::uint8_t>();
  if (fs_raw >= kFeatureSetCount) malformed("unknown feature set id " + std::to_string(fs_raw));
  const auto fs_id = static_cast<FeatureSetId>(fs_raw);
  const FeatureSet& fs = FeatureSet::get(fs_id);
  const auto reserved = r.get<std::uint8_t>();
  const auto p_micros = r.get<std::uint32_t>();
  const auto max_nodes = r.get<std::uint32_t>();
  const auto seed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  PopCounters total;
  total.flows = r.get<std::uint64_t>();
  total.packets = r.get<std::uint64_t>();
  total.bytes = r.get<std::uint64_t>();
  const auto crc = r.get<std::uint32_t>();

  const std::size_t body_size = static_cast<std::size_t>(count) * record_size(fs);
  const std::size_t have = bytes.size() - kHeaderSize;
  if (have < body_size) throw DecodeError(DecodeErrorKind::kTruncated, "short body");
  if (have > body_size) malformed("trailing bytes after body");
  const auto body = bytes.subspan(kHeaderSize);
  if (crc_of(body) != crc) throw DecodeError(DecodeErrorKind::kChecksumMismatch, "body CRC mismatch");
  if (reserved != 0) malformed("reserved header byte is not zero");
  if (p_micros == 0 || p_micros > 1000000) malformed("insert probability out of range");
  if (max_nodes < kMinMaxNodes) malformed("max_nodes below minimum");
  if (count == 0) malformed("missing root");

  std::vector<std::pair<FlowKey, PopCounters>> entries;
  entries.reserve(count);
  Reader b(body);
  for (std::uint32_t n = 0; n < count; ++n) {
    FlowKey key{fs_id, {}, {}};
    for (std::size_t i = 0; i < fs.size(); ++i) {
      key.values[i] = b.get<std::uint32_t>();
      key.masks[i] = b.get<std::uint8_t>();
      if (key.masks[i] > fs.width(i)) malformed("mask exceeds feature width");
    }
    PopCounters comp;
    comp.flows = b.get<std::uint64_t>();
    comp.packets = b.get<std::uint64_t>();
    comp.bytes = b.get<std::uint64_t>();
    if (!is_canonical(key)) malformed("non-canonical key " + to_string(key));
    if (n == 0 && !key.is_root()) malformed("missing root");
    entries.emplace_back(key, comp);
  }
  try {
    Flowtree tree = Flowtree::from_entries(
        fs_id, TreeOptions{max_nodes, p_micros / 1e6, seed}, std::move(entries));
    if (!(tree.total() == total)) malformed("total does not match node sum");
    return tree;
  } catch (const InvalidKey& e) {
    malformed(e.what());
  } catch (const CounterOverflow& e) {
    malformed(e.what());
  }
}

}  // namespace flowtree
