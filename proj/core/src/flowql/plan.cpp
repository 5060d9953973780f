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

#include "flowtree/flowql/plan.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"

namespace flowtree::flowql {

namespace {

/// Removes duplicates and absorbed conjunctions; keeps first-seen order.
void normalize(std::vector<Conjunction>& dnf) {
  for (auto& c : dnf) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  std::vector<Conjunction> kept;
  for (std::size_t i = 0; i < dnf.size(); ++i) {
    bool drop = false;
    for (std::size_t j = 0; j < dnf.size() && !drop; ++j) {
      if (i == j) continue;
      const bool subset = std::includes(dnf[i].begin(), dnf[i].end(), dnf[j].begin(), dnf[j].end());
      // Equal conjunctions: keep the first occurrence only.
      if (subset && (dnf[i].size() != dnf[j].size() || j < i)) drop = true;
    }
    if (!drop) kept.push_back(dnf[i]);
  }
  dnf = std::move(kept);
}

std::vector<Conjunction> dnf_of(const Expr& e, std::size_t limit) {
  switch (e.kind) {
    case Expr::Kind::kAtom: return {{e.atom}};
    case Expr::Kind::kOr: {
      std::vector<Conjunction> out;
      for (const auto& c : e.children) {
        auto part = dnf_of(c, limit);
        out.insert(out.end(), part.begin(), part.end());
      }
      normalize(out);
      if (out.size() > limit) throw SemanticError("where clause expands to too many mini-queries");
      return out;
    }
    case Expr::Kind::kAnd: {
      std::vector<Conjunction> out{{}};
      for (const auto& c : e.children) {
        const auto part = dnf_of(c, limit);
        if (out.size() * part.size() > limit) {
          throw SemanticError("where clause expands to too many mini-queries");
        }
        std::vector<Conjunction> product;
        for (const auto& a : out) {
          for (const auto& b : part) {
            Conjunction m = a;
            m.insert(m.end(), b.begin(), b.end());
            product.push_back(std::move(m));
          }
        }
        normalize(product);
        out = std::move(product);
      }
      return out;
    }
  }
  return {};
}

}  // namespace

std::vector<Conjunction> to_dnf(const Expr& where, std::size_t limit) {
  auto out = dnf_of(where, limit);
  normalize(out);
  return out;
}

bool evaluate(const Expr& e, const std::function<bool(const Atom&)>& truth) {
  switch (e.kind) {
    case Expr::Kind::kAtom: return truth(e.atom);
    case Expr::Kind::kAnd:
      return std::all_of(e.children.begin(), e.children.end(),
                         [&](const Expr& c) { return evaluate(c, truth); });
    case Expr::Kind::kOr:
      return std::any_of(e.children.begin(), e.children.end(),
                         [&](const Expr& c) { return evaluate(c, truth); });
  }
  return false;
}

bool evaluate(const std::vector<Conjunction>& dnf, const std::function<bool(const Atom&)>& truth) {
  return std::any_of(dnf.begin(), dnf.end(), [&](const Conjunction& c) {
    return std::all_of(c.begin(), c.end(), truth);
  });
}

std::optional<MiniQuery> resolve(const Conjunction& c) {
  MiniQuery m;
  m.atoms = c;
  // Per-feature prefix (value, mask); absent means unmentioned.
  std::array<std::optional<std::pair<std::uint32_t, std::uint8_t>>, 4> prefix;
  for (const Atom& a : c) {
    if (a.field == Field::kSiteId) {
      std::uint32_t lo = 0, hi = kAllSites - 1;
      if (a.iterate && a.ranged) {
        lo = a.value;
        const std::uint64_t top = std::uint64_t{a.value} + ((std::uint64_t{1} << a.mask) - 1);
        hi = static_cast<std::uint32_t>(std::min<std::uint64_t>(top, kAllSites - 1));
      } else if (!a.iterate && !a.any) {
        lo = hi = a.value;
      }
      m.sites.iterate = m.sites.iterate || a.iterate;
      m.sites.lo = std::max(m.sites.lo, lo);
      m.sites.hi = std::min(m.sites.hi, hi);
      if (m.sites.lo > m.sites.hi) return std::nullopt;
      continue;
    }
    if (a.field == Field::kProto) {
      if (a.any) continue;
      throw SemanticError("proto constraints cannot be evaluated: stored trees carry no protocol feature");
    }
    const Feature f = *feature_of(a.field);
    const auto slot = static_cast<std::size_t>(f);
    const std::uint8_t width = feature_width(f);
    auto& p = prefix[slot];
    if (!p) {
      p = std::pair{a.value, a.mask};
      continue;
    }
    // Nested prefixes intersect to the longer one; others are disjoint.
    const std::uint8_t shorter = std::min(p->second, a.mask);
    if (prefix_of(p->first, shorter, width) != prefix_of(a.value, shorter, width)) return std::nullopt;
    if (a.mask > p->second) p = std::pair{a.value, a.mask};
  }
  std::array<bool, 4> wanted{};
  bool any_feature = false;
  for (std::size_t i = 0; i < 4; ++i) {
    wanted[i] = prefix[i].has_value();
    any_feature = any_feature || wanted[i];
  }
  m.feature_set = any_feature ? covering_feature_set(std::span<const bool, 4>(wanted))
                              : FeatureSetId::kSI;
  const FeatureSet& fs = FeatureSet::get(m.feature_set);
  m.key = FlowKey::root(m.feature_set);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const auto& p = prefix[static_cast<std::size_t>(fs.features()[i])];
    if (!p) continue;
    m.key.values[i] = p->first;
    m.key.masks[i] = p->second;
  }
  return m;
}

namespace {

/// (site, start) pairs per granularity for one feature set.
using Inventory = std::map<Granularity, std::set<std::pair<std::uint32_t, std::uint64_t>>>;

Inventory inventory(const FlowDB& db, FeatureSetId fs, std::uint64_t from, std::uint64_t to,
                    std::optional<Granularity> max_g) {
  Inventory inv;
  for (Granularity g : kAllGranularities) {
    if (max_g && g > *max_g) continue;
    // Trees of coarse bins may start before `from` and still be unusable,
    // since a cover only takes bins lying inside the span.
    auto& slot = inv[g];
    for (const auto& k : db.range(SiteFilter::any(), fs, g, from, to)) slot.emplace(k.site, k.start);
    for (const auto& k : db.range(SiteFilter::all(), fs, g, from, to)) slot.emplace(k.site, k.start);
  }
  return inv;
}

/// Tiles [a, b) greedily with the coarsest stored bins of `site`.
FetchList cover(const Inventory& inv, FeatureSetId fs, std::uint32_t site, std::uint64_t a,
                std::uint64_t b) {
  FetchList out;
  std::uint64_t t = a;
  while (t < b) {
    bool found = false;
    for (auto it = kAllGranularities.rbegin(); it != kAllGranularities.rend(); ++it) {
      const std::uint64_t d = duration_seconds(*it);
      if (t % d != 0 || t + d > b) continue;
      const auto slot = inv.find(*it);
      if (slot == inv.end() || !slot->second.count({site, t})) continue;
      out.keys.push_back(TreeKey{site, fs, *it, t});
      t += d;
      found = true;
      break;
    }
    if (!found) {
      out.partial = true;
      t = t - t % 60 + 60;
    }
  }
  return out;
}

/// Inputs for an unrestricted, non-iterated scope.
FetchList cover_all_sites(const Inventory& inv, FeatureSetId fs,
                          const std::vector<std::uint32_t>& sites, std::uint64_t a,
                          std::uint64_t b) {
  FetchList rollup = cover(inv, fs, kAllSites, a, b);
  if (!rollup.partial) return rollup;
  FetchList merged;
  bool any_site = false;
  for (std::uint32_t s : sites) {
    FetchList part = cover(inv, fs, s, a, b);
    any_site = any_site || !part.keys.empty();
    merged.partial = merged.partial || part.partial;
    merged.keys.insert(merged.keys.end(), part.keys.begin(), part.keys.end());
  }
  if (!any_site) {
    merged.partial = true;
    if (!rollup.keys.empty()) return rollup;
  }
  return merged;
}

std::string scope_label(const SiteScope& s) {
  if (s.unrestricted()) return "ANY";
  if (s.lo == s.hi) return std::to_string(s.lo);
  return std::to_string(s.lo) + "-" + std::to_string(s.hi);
}

}  // namespace

Plan plan(const Query& q, const FlowDB& db, const PlanOptions& opts) {
  Plan p;
  p.query = q;
  if (q.select.proto != ProtoScope::kAny) {
    throw SemanticError("protocol scope tcp/udp cannot be evaluated: stored trees carry no protocol feature");
  }
  for (const auto& c : to_dnf(q.where)) {
    auto m = resolve(c);
    if (!m) {
      std::string text;
      for (const Atom& a : c) text += (text.empty() ? "" : " and ") + render(a);
      p.warnings.push_back("unsatisfiable conjunction dropped: " + text);
      continue;
    }
    if (std::find(p.minis.begin(), p.minis.end(), *m) != p.minis.end()) continue;
    p.minis.push_back(std::move(*m));
  }

  std::uint64_t lo = ~std::uint64_t{0}, hi = 0;
  for (const auto& r : q.ranges) {
    lo = std::min(lo, r.from);
    hi = std::max(hi, r.to);
  }
  const std::vector<std::uint32_t> all_sites = db.sites();
  std::map<FeatureSetId, Inventory> inventories;

  std::size_t partial_units = 0;
  for (std::size_t mi = 0; mi < p.minis.size(); ++mi) {
    const MiniQuery& m = p.minis[mi];
    auto [inv_it, fresh] = inventories.try_emplace(m.feature_set);
    if (fresh) inv_it->second = inventory(db, m.feature_set, lo, hi, opts.max_granularity);
    const Inventory& inv = inv_it->second;

    // Site scopes: one unrestricted scope, one merged interval, or one per
    // known site when iterating.
    struct Scope {
      std::uint32_t site;
      std::string label;
      std::vector<std::uint32_t> members;
      bool rollup;
    };
    std::vector<Scope> scopes;
    std::vector<std::uint32_t> members;
    for (std::uint32_t s : all_sites) {
      if (s >= m.sites.lo && s <= m.sites.hi) members.push_back(s);
    }
    if (m.sites.iterate) {
      for (std::uint32_t s : members) scopes.push_back({s, std::to_string(s), {s}, false});
      if (members.empty()) p.warnings.push_back("site iterator matches no stored site");
    } else if (m.sites.unrestricted()) {
      scopes.push_back({kAllSites, "ANY", all_sites, true});
    } else {
      scopes.push_back({m.sites.lo == m.sites.hi ? m.sites.lo : kAllSites, scope_label(m.sites),
                        members, false});
    }

    auto cover_scope = [&](const Scope& s, std::uint64_t a, std::uint64_t b) {
      if (s.rollup) return cover_all_sites(inv, m.feature_set, s.members, a, b);
      FetchList out;
      if (s.members.empty()) out.partial = true;
      for (std::uint32_t site : s.members) {
        FetchList part = cover(inv, m.feature_set, site, a, b);
        out.partial = out.partial || part.partial;
        out.keys.insert(out.keys.end(), part.keys.begin(), part.keys.end());
      }
      return out;
    };

    for (const Scope& s : scopes) {
      if (q.select.kind == SelectKind::kHc) {
        Unit u{mi, s.site, s.label, q.ranges[0].from, q.ranges[1].to, {}};
        for (const auto& r : q.ranges) u.inputs.push_back(cover_scope(s, r.from, r.to));
        p.units.push_back(std::move(u));
        continue;
      }
      for (const auto& r : q.ranges) {
        const std::uint64_t step = q.select.bin_minutes ? std::uint64_t{*q.select.bin_minutes} * 60
                                                        : r.to - r.from;
        for (std::uint64_t b = r.from; b < r.to; b += step) {
          p.units.push_back(Unit{mi, s.site, s.label, b, b + step, {cover_scope(s, b, b + step)}});
        }
      }
    }
  }
  for (const auto& u : p.units) {
    if (std::any_of(u.inputs.begin(), u.inputs.end(), [](const FetchList& f) { return f.partial; })) {
      ++partial_units;
    }
  }
  if (partial_units) {
    p.warnings.push_back("partial coverage: " + std::to_string(partial_units) + " of " +
                         std::to_string(p.units.size()) +
                         " cells are not fully covered by stored trees");
  }
  return p;
}

std::string explain(const Plan& p) {
  std::ostringstream out;
  out << "query: " << render(p.query) << "\n";
  out << "mini-queries: " << p.minis.size() << "\n";
  constexpr std::size_t kListedUnits = 64;
  for (std::size_t mi = 0; mi < p.minis.size(); ++mi) {
    const MiniQuery& m = p.minis[mi];
    out << "mini-query " << mi + 1 << ": feature_set=" << to_string(m.feature_set)
        << " key=" << to_string(m.key) << " sites=" << (m.sites.iterate ? "ITR " : "")
        << scope_label(m.sites) << "\n";
    std::map<std::size_t, std::size_t> fan_in;
    std::set<std::string> sites;
    std::size_t units = 0, trees = 0, listed = 0;
    for (const auto& u : p.units) {
      if (u.mini != mi) continue;
      ++units;
      sites.insert(u.site_label);
      for (const auto& in : u.inputs) {
        ++fan_in[in.keys.size()];
        trees += in.keys.size();
      }
      if (listed++ >= kListedUnits) continue;
      out << "  site " << u.site_label << " [" << format_minute(u.bin_start) << ", "
          << format_minute(u.bin_end) << "):";
      for (std::size_t i = 0; i < u.inputs.size(); ++i) {
        if (u.inputs.size() > 1) out << " input " << i + 1 << ":";
        for (const auto& k : u.inputs[i].keys) out << " " << to_string(k);
        if (u.inputs[i].keys.empty()) out << " (no data)";
        else if (u.inputs[i].partial) out << " (partial)";
      }
      out << "\n";
    }
    if (listed > kListedUnits) out << "  ... " << listed - kListedUnits << " more cells\n";
    out << "  cells: " << units << " over " << sites.size() << " site scope(s), trees fetched: "
        << trees << "\n";
    for (const auto& [n, count] : fan_in) {
      out << "  ";
      if (n == 0) out << "no data";
      else if (n == 1) out << "single fetch";
      else out << n << "-way merge";
      out << " × " << count << (count == 1 ? " bin" : " bins") << "\n";
    }
  }
  for (const auto& w : p.warnings) out << "warning: " << w << "\n";
  return out.str();
}

}  // namespace flowtree::flowql
