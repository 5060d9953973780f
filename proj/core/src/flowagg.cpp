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

#include "flowtree/flowagg.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "flowtree/errors.hpp"

namespace flowtree {
namespace {

constexpr std::size_t kChunk = 1 << 16;

class StreamLineReader final : public LineReader {
 public:
  using Source = std::function<std::size_t(char*, std::size_t)>;

  explicit StreamLineReader(Source src) : src_(std::move(src)), in_(kChunk, '\0') {
    in_len_ = src_(in_.data(), in_.size());
    gzip_ = in_len_ >= 2 && static_cast<unsigned char>(in_[0]) == 0x1f &&
            static_cast<unsigned char>(in_[1]) == 0x8b;
    if (gzip_ && inflateInit2(&zs_, 16 + MAX_WBITS) != Z_OK) {
      throw FormatError("cannot initialize gzip decoder");
    }
  }
  ~StreamLineReader() override {
    if (gzip_) inflateEnd(&zs_);
  }
  StreamLineReader(const StreamLineReader&) = delete;
  StreamLineReader& operator=(const StreamLineReader&) = delete;

  bool gzip() const override { return gzip_; }

  bool next(std::string& line) override {
    for (;;) {
      const auto nl = buf_.find('\n', pos_);
      if (nl != std::string::npos) {
        line.assign(buf_, pos_, nl - pos_);
        pos_ = nl + 1;
        strip_cr(line);
        return true;
      }
      buf_.erase(0, pos_);
      pos_ = 0;
      if (!fill()) {
        if (buf_.empty()) return false;
        line.swap(buf_);
        buf_.clear();
        strip_cr(line);
        return true;
      }
    }
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  bool refill_input() {
    if (in_pos_ < in_len_) return true;
    in_len_ = src_(in_.data(), in_.size());
    in_pos_ = 0;
    return in_len_ > 0;
  }

  bool fill() {
    if (!gzip_) {
      if (!refill_input()) return false;
      buf_.append(in_.data() + in_pos_, in_len_ - in_pos_);
      in_pos_ = in_len_;
      return true;
    }
    char out[kChunk];
    for (;;) {
      if (!refill_input()) {
        if (!stream_end_) throw FormatError("truncated gzip stream");
        return false;
      }
      if (stream_end_) {
        // Concatenated gzip members.
        inflateReset(&zs_);
        stream_end_ = false;
      }
      zs_.next_in = reinterpret_cast<Bytef*>(in_.data() + in_pos_);
      zs_.avail_in = static_cast<uInt>(in_len_ - in_pos_);
      zs_.next_out = reinterpret_cast<Bytef*>(out);
      zs_.avail_out = kChunk;
      const int rc = inflate(&zs_, Z_NO_FLUSH);
      in_pos_ = in_len_ - zs_.avail_in;
      if (rc == Z_STREAM_END) {
        stream_end_ = true;
      } else if (rc != Z_OK && rc != Z_BUF_ERROR) {
        throw FormatError("corrupt gzip data");
      }
      const std::size_t produced = kChunk - zs_.avail_out;
      if (produced > 0) {
        buf_.append(out, produced);
        return true;
      }
    }
  }

  Source src_;
  std::string in_;
  std::size_t in_len_ = 0, in_pos_ = 0;
  bool gzip_ = false;
  bool stream_end_ = false;
  z_stream zs_{};
  std::string buf_;
  std::size_t pos_ = 0;
};

template <typename T>
bool parse_num(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

template <std::size_t N>
bool split(std::string_view line, std::array<std::string_view, N>& out) {
  std::size_t i = 0;
  while (true) {
    const auto comma = line.find(',');
    if (i == N) return false;
    out[i++] = line.substr(0, comma);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return i == N;
}

// Shared middle of both formats: site, 5-tuple. Returns false on any error.
bool parse_tuple(const std::string_view* f, FlowRecord& r) {
  std::uint32_t port = 0, proto = 0;
  if (!parse_num(f[0], r.site_id) || r.site_id == kAllSites) return false;
  auto src = parse_ipv4(f[1]), dst = parse_ipv4(f[2]);
  if (!src || !dst) return false;
  r.src_ip = *src;
  r.dst_ip = *dst;
  if (!parse_num(f[3], port) || port > 65535) return false;
  r.src_port = static_cast<std::uint16_t>(port);
  if (!parse_num(f[4], port) || port > 65535) return false;
  r.dst_port = static_cast<std::uint16_t>(port);
  if (!parse_num(f[5], proto) || proto > 255) return false;
  r.proto = static_cast<std::uint8_t>(proto);
  return true;
}

bool parse_flow_line(std::string_view line, FlowRecord& r) {
  std::array<std::string_view, 9> f;
  if (!split(line, f)) return false;
  if (!parse_num(f[0], r.ts) || !parse_tuple(&f[1], r)) return false;
  return parse_num(f[7], r.packets) && parse_num(f[8], r.bytes) && r.packets >= 1 && r.bytes >= 1;
}

bool parse_packet_line(std::string_view line, FlowRecord& r) {
  std::array<std::string_view, 8> f;
  if (!split(line, f)) return false;
  std::uint64_t ts_us = 0;
  if (!parse_num(f[0], ts_us) || !parse_tuple(&f[1], r)) return false;
  r.ts = ts_us / 1000000;
  r.packets = 1;
  return parse_num(f[7], r.bytes) && r.bytes >= 1;
}

bool read_header(LineReader& in, std::string& header) {
  while (in.next(header)) {
    if (!header.empty()) return true;
  }
  return false;
}

IngestReport parse_body(LineReader& in, InputFormat format, const RecordSink& sink,
                        const ParseOptions& opts) {
  IngestReport rep;
  rep.format = format;
  rep.gzip = in.gzip();
  std::string line;
  std::uint64_t lineno = 1;
  FlowRecord r;
  while (in.next(line)) {
    ++lineno;
    if (line.empty()) continue;
    ++rep.lines;
    const bool ok = format == InputFormat::kFlowCsv ? parse_flow_line(line, r) : parse_packet_line(line, r);
    if (!ok) {
      ++rep.malformed;
      if (rep.malformed_examples.size() < opts.keep_examples) rep.malformed_examples.push_back(lineno);
      continue;
    }
    if (r.bytes < r.packets) ++rep.flagged;
    ++rep.records;
    rep.totals += PopCounters{1, r.packets, r.bytes};
    sink(r);
  }
  if (static_cast<double>(rep.malformed) > opts.max_malformed_fraction * static_cast<double>(rep.lines)) {
    throw IngestQualityError("too many malformed lines: " + rep.to_string());
  }
  return rep;
}

}  // namespace

std::string IngestReport::to_string() const {
  std::ostringstream out;
  out << "source=" << (source.empty() ? "-" : source)
      << " format=" << (format == InputFormat::kFlowCsv ? "flow_csv" : "packet_csv")
      << " gzip=" << (gzip ? 1 : 0) << " lines=" << lines << " records=" << records
      << " malformed=" << malformed << " flagged=" << flagged << " flows=" << totals.flows
      << " packets=" << totals.packets << " bytes=" << totals.bytes;
  if (!malformed_examples.empty()) {
    out << " malformed_lines=";
    for (std::size_t i = 0; i < malformed_examples.size(); ++i) {
      out << (i ? "," : "") << malformed_examples[i];
    }
  }
  return out.str();
}

std::unique_ptr<LineReader> LineReader::open_file(const std::string& path) {
  auto file = std::make_shared<std::ifstream>(path, std::ios::binary);
  if (!*file) throw StorageError("cannot open " + path);
  return std::make_unique<StreamLineReader>([file](char* buf, std::size_t n) {
    file->read(buf, static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(file->gcount());
  });
}

std::unique_ptr<LineReader> LineReader::from_bytes(std::string bytes) {
  auto data = std::make_shared<std::string>(std::move(bytes));
  auto pos = std::make_shared<std::size_t>(0);
  return std::make_unique<StreamLineReader>([data, pos](char* buf, std::size_t n) {
    const std::size_t take = std::min(n, data->size() - *pos);
    std::copy_n(data->data() + *pos, take, buf);
    *pos += take;
    return take;
  });
}

std::unique_ptr<LineReader> LineReader::from_stream(std::istream& in) {
  return std::make_unique<StreamLineReader>([&in](char* buf, std::size_t n) {
    in.read(buf, static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount());
  });
}

IngestReport parse_input(LineReader& in, const RecordSink& sink, const ParseOptions& opts) {
  std::string header;
  if (!read_header(in, header)) throw FormatError("missing header");
  if (header == kFlowCsvHeader) return parse_body(in, InputFormat::kFlowCsv, sink, opts);
  if (header == kPacketCsvHeader) return parse_body(in, InputFormat::kPacketCsv, sink, opts);
  throw FormatError("missing or unknown header: '" + header.substr(0, 80) + "'");
}

IngestReport parse_flow_csv(LineReader& in, const RecordSink& sink, const ParseOptions& opts) {
  std::string header;
  if (!read_header(in, header) || header != kFlowCsvHeader) {
    throw FormatError("missing flow header '" + std::string(kFlowCsvHeader) + "'");
  }
  return parse_body(in, InputFormat::kFlowCsv, sink, opts);
}

IngestReport parse_packet_summaries(LineReader& in, const RecordSink& sink, const ParseOptions& opts) {
  std::string header;
  if (!read_header(in, header) || header != kPacketCsvHeader) {
    throw FormatError("missing packet header '" + std::string(kPacketCsvHeader) + "'");
  }
  return parse_body(in, InputFormat::kPacketCsv, sink, opts);
}

std::vector<FlowRecord> parse_text(std::string text, IngestReport* report, const ParseOptions& opts) {
  auto in = LineReader::from_bytes(std::move(text));
  std::vector<FlowRecord> out;
  IngestReport rep = parse_input(*in, [&](const FlowRecord& r) { out.push_back(r); }, opts);
  if (report) *report = rep;
  return out;
}

std::string to_flow_csv(std::span<const FlowRecord> records) {
  std::string out(kFlowCsvHeader);
  out += '\n';
  for (const FlowRecord& r : records) {
    out += std::to_string(r.ts) + ',' + std::to_string(r.site_id) + ',' + format_ipv4(r.src_ip) + ',' +
           format_ipv4(r.dst_ip) + ',' + std::to_string(r.src_port) + ',' + std::to_string(r.dst_port) +
           ',' + std::to_string(r.proto) + ',' + std::to_string(r.packets) + ',' +
           std::to_string(r.bytes) + '\n';
  }
  return out;
}

std::array<std::uint32_t, kFeatureSetCount> AggConfig::default_caps() {
  std::array<std::uint32_t, kFeatureSetCount> caps;
  caps.fill(kDefaultMaxNodes);
  caps[static_cast<std::size_t>(FeatureSetId::kSP)] = 10000;
  caps[static_cast<std::size_t>(FeatureSetId::kDP)] = 10000;
  return caps;
}

void AggConfig::scale_caps(std::uint64_t num, std::uint64_t den) {
  if (num == 0 || den == 0) throw InvalidArgument("cap scale must be positive");
  for (auto& c : max_nodes) {
    c = static_cast<std::uint32_t>(std::max<std::uint64_t>(kMinMaxNodes, c * num / den));
  }
}

std::uint64_t tree_seed(std::uint64_t base, const TreeKey& key) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ key.site);
  h = mix(h ^ static_cast<std::uint64_t>(key.feature_set));
  h = mix(h ^ static_cast<std::uint64_t>(key.granularity));
  return mix(h ^ key.start);
}

Aggregator::Aggregator(AggConfig cfg, TreeSink sink) : cfg_(std::move(cfg)), sink_(std::move(sink)) {
  if (cfg_.feature_sets.empty()) throw InvalidArgument("no feature sets configured");
}

void Aggregator::add(const FlowRecord& r) {
  const std::uint64_t start = align_down(r.ts, cfg_.base);
  auto [it, fresh] = open_.try_emplace({r.site_id, start});
  if (fresh) {
    if (auto h = emitted_.find(r.site_id); h != emitted_.end() && start < h->second) it->second.late = true;
    it->second.trees.reserve(cfg_.feature_sets.size());
    for (FeatureSetId fs : cfg_.feature_sets) {
      const TreeKey key{r.site_id, fs, cfg_.base, start};
      it->second.trees.emplace_back(fs, TreeOptions{cfg_.cap(fs), cfg_.insert_probability,
                                                    tree_seed(cfg_.seed, key)});
    }
  }
  if (it->second.late) ++late_records_;
  for (Flowtree& t : it->second.trees) t.add_flow(r);
  advance(r.site_id, start);
}

void Aggregator::advance(std::uint32_t site, std::uint64_t newest_start) {
  auto [nit, fresh] = newest_.try_emplace(site, newest_start);
  if (!fresh && newest_start <= nit->second) return;
  nit->second = newest_start;
  const std::uint64_t span = std::uint64_t{cfg_.watermark_bins} * duration_seconds(cfg_.base);
  if (newest_start < span) return;
  const std::uint64_t horizon = newest_start - span;
  auto& done = emitted_[site];
  if (horizon <= done) return;
  for (auto it = open_.lower_bound({site, done}); it != open_.end() && it->first.first == site &&
                                                  it->first.second < horizon;) {
    // Late re-opened bins wait for flush() so they are emitted once.
    if (it->second.late) {
      ++it;
      continue;
    }
    emit(site, it->first.second, it->second);
    it = open_.erase(it);
  }
  done = horizon;
}

void Aggregator::emit(std::uint32_t site, std::uint64_t start, Bin& bin) {
  for (std::size_t i = 0; i < bin.trees.size(); ++i) {
    Flowtree& t = bin.trees[i];
    if (cfg_.scale) t.rescale(cfg_.scale->first, cfg_.scale->second);
    sink_(TreeKey{site, cfg_.feature_sets[i], cfg_.base, start}, std::move(t));
    ++trees_emitted_;
  }
}

void Aggregator::flush() {
  for (auto& [k, bin] : open_) emit(k.first, k.second, bin);
  open_.clear();
  for (const auto& [site, newest] : newest_) {
    emitted_[site] = std::max(emitted_[site], newest + duration_seconds(cfg_.base));
  }
}

std::vector<std::pair<TreeKey, Flowtree>> bin_and_build(std::span<const FlowRecord> records,
                                                        const AggConfig& cfg) {
  std::vector<std::pair<TreeKey, Flowtree>> out;
  AggConfig c = cfg;
  c.watermark_bins = std::numeric_limits<std::uint32_t>::max() / 2;
  Aggregator agg(c, [&](const TreeKey& k, Flowtree&& t) { out.emplace_back(k, std::move(t)); });
  for (const FlowRecord& r : records) agg.add(r);
  agg.flush();
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::pair<TreeKey, Flowtree> rollup(std::span<const KeyedTree> trees, Granularity target,
                                    std::uint32_t max_nodes, std::size_t workers) {
  if (trees.empty()) throw InvalidArgument("rollup needs at least one tree");
  const TreeKey& first = trees.front().first;
  if (!divides(first.granularity, target) ||
      duration_seconds(target) < duration_seconds(first.granularity)) {
    throw WindowError(std::string(to_string(target)) + " is not a multiple of " +
                      std::string(to_string(first.granularity)));
  }
  const std::uint64_t window = align_down(first.start, target);
  std::vector<const Flowtree*> ptrs;
  ptrs.reserve(trees.size());
  for (const auto& [key, tree] : trees) {
    if (key.site != first.site || key.feature_set != first.feature_set ||
        key.granularity != first.granularity) {
      throw InvalidArgument("rollup inputs mix sites, feature sets or granularities");
    }
    if (tree->feature_set() != key.feature_set) throw KeyMismatch("tree does not match " + to_string(key));
    if (align_down(key.start, target) != window) {
      throw WindowError("rollup inputs span more than one " + std::string(to_string(target)) + " window");
    }
    ptrs.push_back(tree);
  }
  MergeOptions mo;
  mo.max_nodes = max_nodes;
  mo.workers = workers;
  return {TreeKey{first.site, first.feature_set, target, window}, Flowtree::merge_all(ptrs, mo)};
}

std::pair<TreeKey, Flowtree> sites_rollup(std::span<const KeyedTree> trees, std::uint32_t max_nodes,
                                          std::size_t workers) {
  if (trees.empty()) throw InvalidArgument("sites rollup needs at least one tree");
  const TreeKey& first = trees.front().first;
  std::vector<const Flowtree*> ptrs;
  for (const auto& [key, tree] : trees) {
    if (key.granularity != first.granularity || key.start != first.start) {
      throw WindowError("sites rollup inputs cover different bins");
    }
    if (key.feature_set != first.feature_set) throw InvalidArgument("sites rollup mixes feature sets");
    if (key.site == kAllSites) throw InvalidArgument("sites rollup input is already an ALL tree");
    ptrs.push_back(tree);
  }
  MergeOptions mo;
  mo.max_nodes = max_nodes;
  mo.workers = workers;
  return {TreeKey{kAllSites, first.feature_set, first.granularity, first.start},
          Flowtree::merge_all(ptrs, mo)};
}

}  // namespace flowtree
