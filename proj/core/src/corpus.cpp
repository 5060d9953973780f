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

#include "flowtree/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_set>

#include "flowtree/errors.hpp"

namespace flowtree {

namespace {

std::discrete_distribution<std::uint32_t> zipf(std::uint32_t n, double alpha) {
  std::vector<double> w(n);
  for (std::uint32_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), alpha);
  return {w.begin(), w.end()};
}

/// Addresses grouped into a few hundred /16 networks so that prefixes above
/// the host level carry aggregated weight.
std::vector<std::uint32_t> address_pool(std::mt19937_64& rng, std::uint32_t n) {
  std::vector<std::uint32_t> nets(std::max<std::uint32_t>(8, n / 64));
  for (auto& net : nets) net = static_cast<std::uint32_t>(rng()) & 0xFFFF0000u;
  std::uniform_int_distribution<std::size_t> pick(0, nets.size() - 1);
  std::unordered_set<std::uint32_t> used;
  std::vector<std::uint32_t> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::uint32_t ip = nets[pick(rng)] | static_cast<std::uint32_t>(rng() & 0xFFFF);
    if (used.insert(ip).second) out.push_back(ip);
  }
  return out;
}

constexpr std::array<std::uint16_t, 20> kServicePorts = {443, 80,  53,  8080, 3074, 22,  25,
                                                         993, 1935, 5222, 8443, 3478, 465, 587,
                                                         110, 143, 21,  3389, 5060, 1900};

std::vector<std::uint16_t> port_pool(std::mt19937_64& rng, std::uint32_t n, std::uint16_t avoid) {
  std::vector<std::uint16_t> out(kServicePorts.begin(), kServicePorts.end());
  std::unordered_set<std::uint16_t> used(out.begin(), out.end());
  used.insert(avoid);
  std::uniform_int_distribution<std::uint32_t> any(1024, 32767);
  while (out.size() < n) {
    const auto p = static_cast<std::uint16_t>(any(rng));
    if (used.insert(p).second) out.push_back(p);
  }
  out.resize(n);
  return out;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& cfg) {
  if (cfg.sites == 0 || cfg.duration == 0 || cfg.ip_pool == 0 || cfg.port_pool == 0) {
    throw InvalidArgument("corpus needs at least one site, one bin and non-empty pools");
  }
  if (cfg.plant_attack && (cfg.attack_site < cfg.first_site || cfg.attack_site - cfg.first_site >= cfg.sites ||
                           cfg.attack_offset + cfg.attack_duration > cfg.duration)) {
    throw InvalidArgument("planted attack must lie within the generated sites and time span");
  }
  std::mt19937_64 rng(cfg.seed);
  const auto src_ips = address_pool(rng, cfg.ip_pool);
  const auto dst_ips = address_pool(rng, cfg.ip_pool);
  const auto ports = port_pool(rng, cfg.port_pool, cfg.attack_port);
  auto src_rank = zipf(cfg.ip_pool, cfg.src_ip_alpha);
  auto dst_rank = zipf(cfg.ip_pool, cfg.dst_ip_alpha);
  auto port_rank = zipf(cfg.port_pool, cfg.port_alpha);
  std::uniform_int_distribution<std::uint32_t> ephemeral(32768, 60999);
  std::exponential_distribution<double> packets_dist(1.0 / 8);
  std::uniform_int_distribution<std::uint64_t> size_dist(40, 1500);
  std::uniform_real_distribution<double> unit(0, 1);

  std::vector<double> site_weight(cfg.sites);
  for (auto& w : site_weight) w = 0.5 + unit(rng);

  Corpus c;
  CorpusTruth& t = c.truth;
  auto push = [&](const FlowRecord& r) {
    c.records.push_back(r);
    const PopCounters pc{1, r.packets, r.bytes};
    t.total += pc;
    t.per_site[r.site_id] += pc;
    if (cfg.plant_attack && r.site_id == cfg.attack_site && r.dst_port == cfg.attack_port) {
      t.attack_port_bins[r.ts - r.ts % 900] += pc;
    }
  };

  constexpr std::uint64_t kBin = 900;
  for (std::uint64_t b = cfg.start; b < cfg.start + cfg.duration; b += kBin) {
    const double phase = 2 * std::numbers::pi * static_cast<double>(b % 86400) / 86400.0;
    // Peak in the evening, trough in the early morning.
    const double diurnal = 1.0 + cfg.diurnal_amplitude * std::sin(phase - std::numbers::pi / 2 - 0.8);
    const std::uint64_t span = std::min(kBin, cfg.start + cfg.duration - b);
    std::uniform_int_distribution<std::uint64_t> offset(0, span - 1);
    for (std::uint32_t s = 0; s < cfg.sites; ++s) {
      const std::uint32_t site = cfg.first_site + s;
      const auto n = static_cast<std::uint32_t>(
          std::lround(cfg.flows_per_bin * diurnal * site_weight[s] * static_cast<double>(span) / kBin));
      for (std::uint32_t i = 0; i < n; ++i) {
        FlowRecord r;
        r.ts = b + offset(rng);
        r.site_id = site;
        const bool heavy = cfg.plant_heavy_pair && unit(rng) < cfg.heavy_share;
        const std::uint16_t service = heavy ? std::uint16_t{443} : ports[port_rank(rng)];
        const auto client = static_cast<std::uint16_t>(ephemeral(rng));
        if (heavy) {
          r.src_ip = cfg.heavy_src | static_cast<std::uint32_t>(rng() & 0xFFFF);
          r.dst_ip = cfg.heavy_dst | static_cast<std::uint32_t>(rng() & 0xFF);
        } else {
          r.src_ip = src_ips[src_rank(rng)];
          r.dst_ip = dst_ips[dst_rank(rng)];
        }
        // Half the flows are requests to the service port, half responses.
        if (heavy || rng() % 2 == 0) {
          r.src_port = client;
          r.dst_port = service;
        } else {
          r.src_port = service;
          r.dst_port = client;
        }
        r.proto = service == 53 || service == 3478 || service == 5060 || service == 1900 ? kProtoUdp
                                                                                          : kProtoTcp;
        r.packets = 1 + std::min<std::uint64_t>(999, static_cast<std::uint64_t>(packets_dist(rng)));
        r.bytes = r.packets * (heavy ? 1500 : size_dist(rng));
        push(r);
      }
    }
  }

  if (cfg.plant_attack) {
    t.attack_site = cfg.attack_site;
    t.attack_start = cfg.start + cfg.attack_offset;
    t.attack_end = t.attack_start + cfg.attack_duration;
    std::uniform_int_distribution<std::uint64_t> when(t.attack_start, t.attack_end - 1);
    std::uniform_int_distribution<std::uint64_t> pkts(10, 40);
    for (std::uint32_t i = 0; i < cfg.attack_flows; ++i) {
      FlowRecord r;
      r.ts = when(rng);
      r.site_id = cfg.attack_site;
      r.src_ip = static_cast<std::uint32_t>(rng());
      r.dst_ip = cfg.attack_victim;
      r.src_port = static_cast<std::uint16_t>(1024 + rng() % 64512);
      r.dst_port = cfg.attack_port;
      r.proto = kProtoUdp;
      r.packets = pkts(rng);
      r.bytes = r.packets * 468;
      push(r);
    }
  }
  std::stable_sort(c.records.begin(), c.records.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.ts < b.ts; });
  return c;
}

std::vector<FlowRecord> zipf_stream(std::size_t flows, double alpha, std::uint32_t domain,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto ips = address_pool(rng, domain);
  auto rank = zipf(domain, alpha);
  std::vector<FlowRecord> out(flows);
  for (std::size_t i = 0; i < flows; ++i) {
    FlowRecord& r = out[i];
    r.ts = i;
    r.site_id = 1;
    r.src_ip = ips[rank(rng)];
    r.dst_ip = static_cast<std::uint32_t>(rng());
    r.src_port = static_cast<std::uint16_t>(rng());
    r.dst_port = static_cast<std::uint16_t>(rng());
    r.proto = kProtoTcp;
    r.packets = 1 + rng() % 16;
    r.bytes = r.packets * (40 + rng() % 1460);
  }
  return out;
}

}  // namespace flowtree
