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
#include "flowtree/service/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/flowql/ast.hpp"

namespace flowtree::service {

namespace {

constexpr std::string_view kDay = "(time {date} 00:00 to {date} 23:59)";

std::string day(std::string head, std::string where) {
  return head + " FROM " + std::string(kDay) + " WHERE site_id={site}" + where;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

const std::vector<BenchTemplate>& benchmark_suite() {
  static const std::vector<BenchTemplate> suite{
      {"aggregate", "aggregate statistics", day("SELECT pop(any,byte)", ""), false},
      {"drilldown", "drill-down counting",
       day("SELECT pop(any,flow,bin60)", " and dst_port=123|16"), true},
      {"matrix", "traffic matrix", day("SELECT above(2000)", " and src_ip=ANY and dst_ip=ANY"), false},
      {"ddos", "DDoS diagnosis", day("SELECT hhh(5,any,packet)", " and dst_ip=ANY and dst_port=ANY"),
       false},
      {"spreader", "super-spreader pair", day("SELECT top(10)", " and src_ip=ANY and dst_port=ANY"),
       false},
      {"topk", "top-k", day("SELECT top(10,any,byte)", " and src_port=ANY"), false},
      {"above", "above threshold", day("SELECT above(1000000,any,byte)", " and dst_ip=ANY"), false},
      {"hhh", "hierarchical heavy hitters", day("SELECT hhh(1)", " and src_ip=ANY"), false},
      {"hc", "heavy changers",
       "SELECT hc(10) FROM (time {date} 00:00 to {date} 11:59) (time {date} 12:00 to {date} 23:59) "
       "WHERE site_id={site} and dst_port=ANY",
       false},
      {"fourtuple", "4-tuple query",
       day("SELECT pop", " and src_ip=10.0.0.0|8 and dst_ip=ANY and src_port=ANY and dst_port=443"),
       false},
  };
  return suite;
}

std::string instantiate(const BenchTemplate& t, std::string_view date, std::string_view site) {
  std::string s = t.text;
  replace_all(s, "{date}", date);
  replace_all(s, "{site}", site);
  return s;
}

std::vector<BenchResult> run_bench(FlowDB& db, const BenchOptions& opts) {
  std::string date = opts.date;
  if (date.empty()) {
    const auto span = db.time_span();
    if (!span) throw InvalidArgument("benchmark needs a non-empty store");
    date = flowql::format_minute(span->first).substr(0, 10);
  }
  for (const auto& n : opts.only) {
    const auto& s = benchmark_suite();
    if (std::none_of(s.begin(), s.end(), [&](const BenchTemplate& t) { return t.name == n; })) {
      throw InvalidArgument("unknown benchmark " + n);
    }
  }
  const std::size_t reps = std::max<std::size_t>(1, opts.repetitions);

  std::vector<BenchResult> out;
  for (const auto& t : benchmark_suite()) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), t.name) == opts.only.end()) {
      continue;
    }
    const std::string text = instantiate(t, date, opts.site);
    for (Granularity mode : opts.modes) {
      flowql::ExecOptions eo = opts.exec;
      eo.plan.max_granularity = mode;
      for (bool cold : {true, false}) {
        if ((cold && !opts.cold) || (!cold && !opts.hot)) continue;
        BenchResult r;
        r.name = t.name;
        r.mode = mode;
        r.cold = cold;
        r.iterator_heavy = t.iterator_heavy;
        r.repetitions = reps;
        if (!cold) flowql::run(text, db, eo);
        std::vector<double> times;
        for (std::size_t i = 0; i < reps; ++i) {
          if (cold) db.drop_cache();
          const auto t0 = std::chrono::steady_clock::now();
          const auto table = flowql::run(text, db, eo);
          times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
          r.rows = table.rows.size();
          r.trees = table.trees_fetched;
        }
        std::sort(times.begin(), times.end());
        r.min_ms = times.front();
        r.max_ms = times.back();
        r.median_ms = times.size() % 2 ? times[times.size() / 2]
                                       : (times[times.size() / 2 - 1] + times[times.size() / 2]) / 2;
        out.push_back(r);
      }
    }
  }
  return out;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream o;
  o << "benchmark,granularity,cache,iterator_heavy,repetitions,min_ms,median_ms,max_ms,rows,trees\n";
  std::map<std::pair<std::string, Granularity>, std::pair<double, double>> cold_hot;
  for (const auto& r : results) {
    o << r.name << ',' << to_string(r.mode) << ',' << (r.cold ? "cold" : "hot") << ','
      << (r.iterator_heavy ? 1 : 0) << ',' << r.repetitions << ',' << fixed(r.min_ms) << ','
      << fixed(r.median_ms) << ',' << fixed(r.max_ms) << ',' << r.rows << ',' << r.trees << '\n';
    auto& slot = cold_hot[{r.name, r.mode}];
    (r.cold ? slot.first : slot.second) = r.median_ms;
  }
  for (const auto& [k, v] : cold_hot) {
    if (v.first > 0 && v.second > 0) {
      o << "# speedup " << k.first << ' ' << to_string(k.second) << " hot/cold median "
        << fixed(100.0 * (v.first - v.second) / v.first) << "%\n";
    }
  }
  return o.str();
}

}  // namespace flowtree::service
