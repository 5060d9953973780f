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

// Ingestion: flow and packet-summary parsers, per-(site, bin) tree
// building with a late-data watermark, and time and site rollups.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowtree/flow_record.hpp"
#include "flowtree/flowtree.hpp"
#include "flowtree/tree_key.hpp"

namespace flowtree {

inline constexpr std::string_view kFlowCsvHeader =
    "ts,site,src_ip,dst_ip,src_port,dst_port,proto,packets,bytes";
inline constexpr std::string_view kPacketCsvHeader =
    "ts_us,site,src_ip,dst_ip,src_port,dst_port,proto,frame_len";

enum class InputFormat { kFlowCsv, kPacketCsv };

struct ParseOptions {
  /// IngestQualityError when malformed lines exceed this fraction of data lines.
  double max_malformed_fraction = 0.01;
  /// How many malformed line numbers to keep for the report.
  std::size_t keep_examples = 5;
};

struct IngestReport {
  std::string source;
  InputFormat format = InputFormat::kFlowCsv;
  bool gzip = false;
  std::uint64_t lines = 0;  // data lines, header and blank lines excluded
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  /// Accepted records with bytes < packets.
  std::uint64_t flagged = 0;
  std::vector<std::uint64_t> malformed_examples;  // 1-based line numbers
  PopCounters totals;

  /// key=value lines.
  std::string to_string() const;
};

/// Line source over plain or gzip data; gzip is detected by magic bytes.
class LineReader {
 public:
  virtual ~LineReader() = default;
  virtual bool next(std::string& line) = 0;
  virtual bool gzip() const { return false; }

  /// Opens a file. Throws StorageError when unreadable.
  static std::unique_ptr<LineReader> open_file(const std::string& path);
  /// Reads from an in-memory buffer, decompressing gzip.
  static std::unique_ptr<LineReader> from_bytes(std::string bytes);
  static std::unique_ptr<LineReader> from_stream(std::istream& in);
};

using RecordSink = std::function<void(const FlowRecord&)>;

/// Parses one input whose header selects the format. Throws FormatError
/// for a missing or unknown header and IngestQualityError when too many
/// lines are malformed (after the sink saw every accepted record).
IngestReport parse_input(LineReader& in, const RecordSink& sink, const ParseOptions& opts = {});
IngestReport parse_flow_csv(LineReader& in, const RecordSink& sink, const ParseOptions& opts = {});
IngestReport parse_packet_summaries(LineReader& in, const RecordSink& sink,
                                    const ParseOptions& opts = {});

/// Convenience over in-memory text.
std::vector<FlowRecord> parse_text(std::string text, IngestReport* report = nullptr,
                                   const ParseOptions& opts = {});

/// Renders records back to the flow CSV format, header included.
std::string to_flow_csv(std::span<const FlowRecord> records);

struct AggConfig {
  Granularity base = Granularity::k15m;
  std::vector<FeatureSetId> feature_sets{all_feature_sets().begin(), all_feature_sets().end()};
  /// Node cap per feature set, indexed by FeatureSetId.
  std::array<std::uint32_t, kFeatureSetCount> max_nodes = default_caps();
  std::vector<Granularity> rollups{Granularity::k1h, Granularity::k1d};
  double insert_probability = kDefaultInsertProbability;
  std::uint64_t seed = 0;
  /// Bins stay open until a record this many bins newer arrives for the site.
  std::uint32_t watermark_bins = 2;
  /// Applied with Flowtree::rescale before a tree is emitted.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> scale;

  std::uint32_t cap(FeatureSetId fs) const { return max_nodes[static_cast<std::size_t>(fs)]; }
  /// Scales every cap by num/den, never below the minimum tree size.
  void scale_caps(std::uint64_t num, std::uint64_t den);

  static std::array<std::uint32_t, kFeatureSetCount> default_caps();
};

/// Deterministic per-tree seed, independent of arrival order.
std::uint64_t tree_seed(std::uint64_t base, const TreeKey& key);

using TreeSink = std::function<void(const TreeKey&, Flowtree&&)>;

/// Streaming binning. Bins are emitted once a record newer than the
/// watermark arrives for the same site, or on flush(). A record for an
/// already emitted bin re-opens it; the store merges the second emission.
class Aggregator {
 public:
  Aggregator(AggConfig cfg, TreeSink sink);

  void add(const FlowRecord& r);
  void flush();

  std::uint64_t trees_emitted() const { return trees_emitted_; }
  std::uint64_t late_records() const { return late_records_; }
  std::size_t open_bins() const { return open_.size(); }
  const AggConfig& config() const { return cfg_; }

 private:
  struct Bin {
    std::vector<Flowtree> trees;
    bool late = false;
  };
  void emit(std::uint32_t site, std::uint64_t start, Bin& bin);
  void advance(std::uint32_t site, std::uint64_t newest_start);

  AggConfig cfg_;
  TreeSink sink_;
  std::map<std::pair<std::uint32_t, std::uint64_t>, Bin> open_;
  std::map<std::uint32_t, std::uint64_t> newest_;   // per-site newest bin start
  std::map<std::uint32_t, std::uint64_t> emitted_;  // per-site emission horizon
  std::uint64_t trees_emitted_ = 0;
  std::uint64_t late_records_ = 0;
};

/// All trees for the records, bins closed at the end.
std::vector<std::pair<TreeKey, Flowtree>> bin_and_build(std::span<const FlowRecord> records,
                                                        const AggConfig& cfg);

using KeyedTree = std::pair<TreeKey, const Flowtree*>;

/// Merges trees of one site and feature set inside one `target` window.
/// Throws WindowError when inputs span more windows or `target` is not a
/// multiple of their granularity; InvalidArgument for empty or mixed input.
std::pair<TreeKey, Flowtree> rollup(std::span<const KeyedTree> trees, Granularity target,
                                    std::uint32_t max_nodes, std::size_t workers = 1);

/// Merges the per-site trees of one bin under site ALL.
std::pair<TreeKey, Flowtree> sites_rollup(std::span<const KeyedTree> trees, std::uint32_t max_nodes,
                                          std::size_t workers = 1);

}  // namespace flowtree
