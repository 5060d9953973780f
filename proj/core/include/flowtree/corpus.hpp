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

// Synthetic multi-site traffic day with planted structure: Zipf-distributed
// features, a diurnal load curve, one heavy src/dst prefix pair, and an NTP
// amplification burst against a single destination. The ground truth it
// returns lets end-to-end queries be checked against exact answers.

#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "flowtree/counters.hpp"
#include "flowtree/flow_record.hpp"

namespace flowtree {

struct CorpusConfig {
  std::uint32_t sites = 50;
  /// First site id; sites are consecutive.
  std::uint32_t first_site = 1;
  std::uint64_t start = 1554076800;  // 2019-04-01 00:00 UTC
  std::uint64_t duration = 86400;
  /// Mean flows per site per 15 minutes before the diurnal factor.
  std::uint32_t flows_per_bin = 150;
  double diurnal_amplitude = 0.5;

  // Zipf exponents and pool sizes per feature.
  double src_ip_alpha = 1.1;
  double dst_ip_alpha = 1.2;
  double port_alpha = 1.3;
  std::uint32_t ip_pool = 20000;
  std::uint32_t port_pool = 2000;
  std::uint64_t seed = 1;

  bool plant_attack = true;
  std::uint32_t attack_site = 7;
  std::uint64_t attack_offset = 4500;  // 01:15
  std::uint64_t attack_duration = 1800;
  std::uint32_t attack_flows = 4000;
  std::uint32_t attack_victim = 0xC6336407;  // 198.51.100.7
  std::uint16_t attack_port = 123;

  bool plant_heavy_pair = true;
  std::uint32_t heavy_src = 0x0A2A0000;  // 10.42.0.0/16
  std::uint32_t heavy_dst = 0xC0A86400;  // 192.168.100.0/24
  /// Fraction of each bin's flows sent between the heavy prefixes.
  double heavy_share = 0.03;
};

struct CorpusTruth {
  PopCounters total;
  std::map<std::uint32_t, PopCounters> per_site;
  /// Traffic to the attack port at the attack site, per 15-minute bin start.
  std::map<std::uint64_t, PopCounters> attack_port_bins;
  std::uint64_t attack_start = 0;
  std::uint64_t attack_end = 0;
  std::uint32_t attack_site = 0;
};

struct Corpus {
  /// Sorted by timestamp.
  std::vector<FlowRecord> records;
  CorpusTruth truth;
};

Corpus generate_corpus(const CorpusConfig& cfg);

/// Zipf(alpha) stream over `domain` distinct source IPs; every other feature
/// is uniform. Used for accuracy and space measurements.
std::vector<FlowRecord> zipf_stream(std::size_t flows, double alpha, std::uint32_t domain,
                                    std::uint64_t seed);

}  // namespace flowtree
