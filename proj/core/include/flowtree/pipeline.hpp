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

// Store-level workflows: ingesting inputs into base trees and materializing
// coarser and all-sites rollups.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowtree/flowagg.hpp"
#include "flowtree/flowdb.hpp"

namespace flowtree {

struct IngestOptions {
  AggConfig agg;
  ParseOptions parse;
  /// Skip inputs whose content digest was ingested before.
  bool dedup = true;
  PutMode mode = PutMode::kMerge;
};

struct IngestSummary {
  std::vector<IngestReport> inputs;
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  std::uint64_t files_skipped = 0;
  std::uint64_t trees_written = 0;
  std::uint64_t late_records = 0;
  double seconds = 0;

  std::string to_string() const;
};

/// Every input is validated before any tree is written, so an input that
/// fails the quality threshold leaves the store untouched. Throws
/// FormatError, IngestQualityError, StorageError.
IngestSummary ingest_files(FlowDB& db, const std::vector<std::filesystem::path>& paths,
                           const IngestOptions& opts);
IngestSummary ingest_records(FlowDB& db, std::span<const FlowRecord> records,
                             const IngestOptions& opts);

struct RollupOptions {
  std::vector<Granularity> targets{Granularity::k1h, Granularity::k1d};
  /// Also build all-sites trees for the base and every target granularity.
  bool all_sites = true;
  std::vector<FeatureSetId> feature_sets{all_feature_sets().begin(), all_feature_sets().end()};
  std::array<std::uint32_t, kFeatureSetCount> max_nodes = AggConfig::default_caps();
  std::size_t workers = 1;
  /// Rebuild rollups that already exist.
  bool force = false;
};

struct RollupSummary {
  std::uint64_t written = 0;
  std::uint64_t already_present = 0;
  double seconds = 0;

  std::string to_string() const;
};

/// Builds each target from the next finer materialized level (1h from 15m,
/// 1d from 1h), per site and feature set. Existing rollups are kept unless
/// `force`, so a second run is a no-op.
RollupSummary build_rollups(FlowDB& db, const RollupOptions& opts);

}  // namespace flowtree
