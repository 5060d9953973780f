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

#include "flowtree/flowql/parser.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <string>
#include <vector>

#include "flowtree/errors.hpp"

namespace flowtree::flowql {

namespace {

enum class Tok { kIdent, kNumber, kDate, kTime, kSym, kEnd };

struct Token {
  Tok type;
  std::string text;
  std::size_t line;
  std::size_t column;
};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string describe(const Token& t) {
  return t.type == Tok::kEnd ? std::string("end of input") : "'" + t.text + "'";
}

[[noreturn]] void fail(const Token& t, const std::string& what) {
  throw SyntaxError(what + ", found " + describe(t) + " at line " + std::to_string(t.line) +
                        ", column " + std::to_string(t.column),
                    t.line, t.column, t.type == Tok::kEnd ? std::string() : t.text);
}

[[noreturn]] void semantic(const Token& t, const std::string& what) {
  throw SemanticError(what + " at line " + std::to_string(t.line) + ", column " +
                      std::to_string(t.column));
}

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    const std::size_t start = i, tl = line, tc = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      advance(j - i);
      out.push_back({Tok::kIdent, std::string(s.substr(start, j - start)), tl, tc});
      continue;
    }
    if (is_digit(c)) {
      std::size_t j = i;
      while (j < s.size() && is_digit(s[j])) ++j;
      Tok type = Tok::kNumber;
      auto digits_at = [&](std::size_t at, std::size_t n) {
        if (at + n > s.size()) return false;
        for (std::size_t k = at; k < at + n; ++k) {
          if (!is_digit(s[k])) return false;
        }
        return at + n == s.size() || !is_digit(s[at + n]);
      };
      if (j - i == 4 && j < s.size() && s[j] == '-' && digits_at(j + 1, 2) && j + 3 < s.size() &&
          s[j + 3] == '-' && digits_at(j + 4, 2)) {
        type = Tok::kDate;
        j += 6;
      } else if (j - i == 2 && j < s.size() && s[j] == ':' && digits_at(j + 1, 2)) {
        type = Tok::kTime;
        j += 3;
      } else {
        while (j < s.size() && (is_digit(s[j]) || s[j] == '.')) ++j;
      }
      advance(j - i);
      out.push_back({type, std::string(s.substr(start, j - start)), tl, tc});
      continue;
    }
    if (std::string_view("()*,=|-").find(c) != std::string_view::npos) {
      advance(1);
      out.push_back({Tok::kSym, std::string(1, c), tl, tc});
      continue;
    }
    const Token bad{Tok::kSym, std::string(1, c), tl, tc};
    fail(bad, "unexpected character");
  }
  out.push_back({Tok::kEnd, "", line, col});
  return out;
}

template <typename T>
std::optional<T> to_uint(std::string_view text) {
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) return std::nullopt;
  return v;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  Query query() {
    expect_keyword("SELECT");
    Query q;
    q.select = select();
    expect_keyword("FROM");
    if (!peek_sym("(")) fail(peek(), "expected '(' starting a time range");
    while (peek_sym("(")) q.ranges.push_back(range());
    expect_keyword("WHERE");
    q.where = disjunction();
    if (peek().type != Tok::kEnd) fail(peek(), "expected 'and', 'or' or end of query");
    check(q);
    return q;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }
  bool peek_sym(std::string_view s) const { return peek().type == Tok::kSym && peek().text == s; }
  bool peek_keyword(std::string_view k) const {
    return peek().type == Tok::kIdent && iequals(peek().text, k);
  }
  void expect_sym(std::string_view s) {
    if (!peek_sym(s)) fail(peek(), "expected '" + std::string(s) + "'");
    next();
  }
  void expect_keyword(std::string_view k) {
    if (!peek_keyword(k)) fail(peek(), "expected '" + std::string(k) + "'");
    next();
  }

  Select select() {
    Select s;
    select_tok_ = peek();
    if (peek_sym("*")) {
      next();
      s.kind = SelectKind::kStar;
    } else if (peek().type == Tok::kIdent) {
      const Token& t = next();
      if (iequals(t.text, "pop")) s.kind = SelectKind::kPop;
      else if (iequals(t.text, "top")) s.kind = SelectKind::kTop;
      else if (iequals(t.text, "hhh")) s.kind = SelectKind::kHhh;
      else if (iequals(t.text, "hc")) s.kind = SelectKind::kHc;
      else if (iequals(t.text, "above")) s.kind = SelectKind::kAbove;
      else fail(t, "expected one of pop, top, hhh, hc, above, *");
    } else {
      fail(peek(), "expected one of pop, top, hhh, hc, above, *");
    }
    if (peek_sym("(")) {
      next();
      args(s);
      while (peek_sym(",")) {
        next();
        args(s);
      }
      expect_sym(")");
    }
    const bool needs_number = s.kind == SelectKind::kTop || s.kind == SelectKind::kHc ||
                              s.kind == SelectKind::kAbove || s.kind == SelectKind::kHhh;
    if (needs_number && !s.count && !s.percent) {
      semantic(select_tok_, std::string(to_string(s.kind)) + " requires a numeric argument");
    }
    return s;
  }

  void args(Select& s) {
    const Token& t = next();
    auto once = [&](bool& seen) {
      if (seen) fail(t, "duplicate argument");
      seen = true;
    };
    if (t.type == Tok::kNumber) {
      once(seen_number_);
      if (s.kind == SelectKind::kPop || s.kind == SelectKind::kStar) {
        semantic(t, std::string(to_string(s.kind)) + " takes no numeric argument");
      }
      if (s.kind == SelectKind::kHhh) {
        double p = 0;
        auto [e, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), p);
        if (ec != std::errc{} || e != t.text.data() + t.text.size()) fail(t, "expected a number");
        if (!(p > 0 && p < 100)) semantic(t, "hhh percent must lie in (0, 100)");
        s.percent = p;
        return;
      }
      const auto v = to_uint<std::uint64_t>(t.text);
      if (!v) fail(t, "expected an integer");
      if ((s.kind == SelectKind::kTop || s.kind == SelectKind::kHc) && *v < 1) {
        semantic(t, "K must be at least 1");
      }
      s.count = *v;
      return;
    }
    if (t.type != Tok::kIdent) fail(t, "expected a select argument");
    if (iequals(t.text, "any") || iequals(t.text, "tcp") || iequals(t.text, "udp")) {
      once(seen_proto_);
      s.proto = iequals(t.text, "any") ? ProtoScope::kAny
                : iequals(t.text, "tcp") ? ProtoScope::kTcp
                                         : ProtoScope::kUdp;
      return;
    }
    if (const auto c = counter_word(t.text)) {
      once(seen_counter_);
      s.counter = *c;
      return;
    }
    if (t.text.size() >= 3 && iequals(t.text.substr(0, 3), "bin")) {
      once(seen_bin_);
      std::string digits = t.text.substr(3);
      const Token* at = &t;
      if (digits.empty()) {
        if (peek().type != Tok::kNumber) fail(peek(), "expected bin width in minutes");
        at = &next();
        digits = at->text;
      }
      const auto v = to_uint<std::uint32_t>(digits);
      if (!v) fail(*at, "expected bin width in minutes");
      if (*v == 0) semantic(*at, "bin width must be positive");
      s.bin_minutes = *v;
      return;
    }
    fail(t, "expected a select argument");
  }

  static std::optional<Counter> counter_word(std::string_view w) {
    for (auto [name, c] : {std::pair{"flow", Counter::kFlows}, std::pair{"flows", Counter::kFlows},
                           std::pair{"packet", Counter::kPackets},
                           std::pair{"packets", Counter::kPackets},
                           std::pair{"byte", Counter::kBytes}, std::pair{"bytes", Counter::kBytes}}) {
      if (iequals(w, name)) return c;
    }
    return std::nullopt;
  }

  TimeRange range() {
    const Token open = next();  // '('
    expect_keyword("time");
    const std::uint64_t from = minute();
    expect_keyword("to");
    const std::uint64_t to = minute();
    expect_sym(")");
    if (from >= to) semantic(open, "time range is empty");
    return {from, to + 60};
  }

  std::uint64_t minute() {
    const Token& d = next();
    if (d.type != Tok::kDate) fail(d, "expected a date YYYY-MM-DD");
    const Token& t = next();
    if (t.type != Tok::kTime) fail(t, "expected a time hh:mm");
    const auto v = parse_minute(d.text, t.text);
    if (!v) fail(d, "invalid date or time");
    return *v;
  }

  Expr disjunction() {
    std::vector<Expr> parts{conjunction()};
    while (peek_keyword("or")) {
      next();
      parts.push_back(conjunction());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return Expr{Expr::Kind::kOr, {}, std::move(parts)};
  }

  Expr conjunction() {
    std::vector<Expr> parts{primary()};
    while (peek_keyword("and")) {
      next();
      parts.push_back(primary());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return Expr{Expr::Kind::kAnd, {}, std::move(parts)};
  }

  Expr primary() {
    if (peek_sym("(")) {
      next();
      Expr e = disjunction();
      expect_sym(")");
      return e;
    }
    const Token& name = next();
    if (name.type != Tok::kIdent || iequals(name.text, "and") || iequals(name.text, "or")) {
      fail(name, "expected a feature name or '('");
    }
    const auto field = parse_field(name.text);
    if (!field) semantic(name, "unknown feature '" + name.text + "'");
    expect_sym("=");
    return Expr::leaf(value(*field));
  }

  Atom value(Field field) {
    Atom a;
    a.field = field;
    const Token& t = next();
    if (t.type == Tok::kIdent && iequals(t.text, "ANY")) {
      a.any = true;
      return a;
    }
    if (field == Field::kSiteId) {
      if (t.type == Tok::kIdent && iequals(t.text, "ITR")) {
        a.iterate = true;
        if (peek_sym("-")) {
          next();
          a.ranged = true;
          a.value = number<std::uint32_t>("expected the first site id of the interval");
          expect_sym("|");
          const Token& m = peek();
          const auto bits = number<std::uint32_t>("expected the interval exponent");
          if (bits > 32) semantic(m, "site interval exponent exceeds 32");
          a.mask = static_cast<std::uint8_t>(bits);
        }
        return a;
      }
      if (t.type != Tok::kNumber) fail(t, "expected ANY, ITR or a site id");
      const auto v = to_uint<std::uint32_t>(t.text);
      if (!v || *v == kAllSitesId) fail(t, "expected a site id");
      a.value = *v;
      return a;
    }
    if (t.type != Tok::kNumber) fail(t, "expected ANY or a value");
    if (field == Field::kProto) {
      const auto v = to_uint<std::uint32_t>(t.text);
      if (!v || *v > 255) fail(t, "expected a protocol number");
      a.value = *v;
      a.mask = 8;
      return a;
    }
    const Feature f = *feature_of(field);
    const std::uint8_t width = feature_width(f);
    std::uint32_t value = 0;
    if (width == 32) {
      const auto ip = parse_ipv4(t.text);
      if (!ip) fail(t, "expected an IPv4 address");
      value = *ip;
    } else {
      const auto v = to_uint<std::uint32_t>(t.text);
      if (!v || *v > 65535) fail(t, "expected a port number");
      value = *v;
    }
    std::uint32_t mask = width;
    if (peek_sym("|")) {
      next();
      const Token& m = peek();
      mask = number<std::uint32_t>("expected a mask length");
      if (mask > width) semantic(m, "mask exceeds feature width");
    }
    a.mask = static_cast<std::uint8_t>(mask);
    a.value = prefix_of(value, a.mask, width);
    a.any = a.mask == 0;
    if (a.any) a.value = 0;
    return a;
  }

  template <typename T>
  T number(const char* what) {
    const Token& t = next();
    if (t.type != Tok::kNumber) fail(t, what);
    const auto v = to_uint<T>(t.text);
    if (!v) fail(t, what);
    return *v;
  }

  void check(const Query& q) const {
    if (q.select.kind == SelectKind::kHc && q.ranges.size() != 2) {
      semantic(select_tok_, "hc requires exactly two time ranges");
    }
    if (q.select.kind == SelectKind::kHc && q.select.bin_minutes) {
      semantic(select_tok_, "hc does not take a bin width");
    }
    if (q.select.bin_minutes) {
      const std::uint64_t w = std::uint64_t{*q.select.bin_minutes} * 60;
      for (const auto& r : q.ranges) {
        if ((r.to - r.from) % w != 0) {
          semantic(select_tok_, "bin width does not divide the time range");
        }
      }
    }
  }

  static constexpr std::uint32_t kAllSitesId = 0xFFFFFFFFu;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Token select_tok_{Tok::kEnd, "", 1, 1};
  bool seen_number_ = false, seen_proto_ = false, seen_counter_ = false, seen_bin_ = false;
};

}  // namespace

std::optional<std::uint64_t> parse_minute(std::string_view date, std::string_view time) {
  if (date.size() != 10 || time.size() != 5) return std::nullopt;
  const auto y = to_uint<int>(date.substr(0, 4));
  const auto mo = to_uint<unsigned>(date.substr(5, 2));
  const auto d = to_uint<unsigned>(date.substr(8, 2));
  const auto hh = to_uint<unsigned>(time.substr(0, 2));
  const auto mm = to_uint<unsigned>(time.substr(3, 2));
  if (!y || !mo || !d || !hh || !mm || *hh > 23 || *mm > 59 || *y < 1970) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{*mo}, day{*d}};
  if (!ymd.ok()) return std::nullopt;
  const auto days_since = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::uint64_t>(days_since) * 86400 + *hh * 3600 + *mm * 60;
}

Query parse(std::string_view text) { return Parser(text).query(); }

}  // namespace flowtree::flowql
