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

// Random flow streams with enough prefix sharing that trees get deep
// interior structure.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "flowtree/flow_record.hpp"

namespace teststreams {

using flowtree::FlowRecord;

struct StreamShape {
  std::size_t flows = 1000;
  std::size_t ip_pool = 64;
  std::size_t port_pool = 16;
  std::uint64_t max_packets = 20;
};

inline std::vector<FlowRecord> random_stream(std::mt19937_64& rng, const StreamShape& shape) {
  std::vector<std::uint32_t> ips(shape.ip_pool), ports(shape.port_pool);
  for (auto& ip : ips) ip = static_cast<std::uint32_t>(rng()) & 0xFF0FFFFFu;
  for (auto& p : ports) p = static_cast<std::uint32_t>(rng() % 65536);
  std::uniform_int_distribution<std::size_t> pick_ip(0, ips.size() - 1), pick_port(0, ports.size() - 1);
  std::uniform_int_distribution<std::uint64_t> pkts(1, shape.max_packets);
  std::vector<FlowRecord> out;
  out.reserve(shape.flows);
  for (std::size_t i = 0; i < shape.flows; ++i) {
    FlowRecord r;
    r.ts = 1554076800 + i;
    r.site_id = 1;
    // Jitter the low bits so pooled addresses spread into sibling prefixes.
    r.src_ip = ips[pick_ip(rng)] ^ static_cast<std::uint32_t>(rng() % 16);
    r.dst_ip = ips[pick_ip(rng)] ^ static_cast<std::uint32_t>(rng() % 4 << 8);
    r.src_port = static_cast<std::uint16_t>(rng() % 4 == 0 ? rng() % 65536 : ports[pick_port(rng)]);
    r.dst_port = static_cast<std::uint16_t>(ports[pick_port(rng)]);
    r.proto = rng() % 2 ? flowtree::kProtoTcp : flowtree::kProtoUdp;
    r.packets = pkts(rng);
    r.bytes = r.packets * (40 + rng() % 1460);
    out.push_back(r);
  }
  return out;
}

}  // namespace teststreams
