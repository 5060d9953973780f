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
#include "flowtree/service/shell.hpp"

#include <chrono>
#include <istream>
#include <ostream>

#include "flowtree/errors.hpp"
#include "flowtree/flowdb.hpp"
#include "flowtree/flowql/parser.hpp"
#include "flowtree/flowql/plan.hpp"

namespace flowtree::service {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string_view strip_semicolon(std::string_view s) {
  s = trim(s);
  while (!s.empty() && s.back() == ';') s = trim(s.substr(0, s.size() - 1));
  return s;
}

constexpr std::string_view kHelp =
    "statements end with ';'\n"
    "  \\explain <query>           show the plan without executing\n"
    "  \\timing [on|off]           toggle the wall-time footer\n"
    "  \\format table|csv|json-lines|json\n"
    "  \\help                      this text\n"
    "  \\quit                      leave the shell\n";

}  // namespace

Shell::Shell(FlowDB& db, std::ostream& out, ShellOptions opts)
    : db_(db), out_(out), opts_(std::move(opts)) {}

template <typename F>
bool Shell::guarded(std::string_view text, F&& f) {
  try {
    f();
    return true;
  } catch (const SyntaxError& e) {
    out_ << caret_message(text, e) << '\n';
  } catch (const SemanticError& e) {
    out_ << "semantic error: " << e.what() << '\n';
  } catch (const Error& e) {
    out_ << "error: " << e.what() << '\n';
  }
  return false;
}

bool Shell::execute(std::string_view text) {
  text = strip_semicolon(text);
  if (text.empty()) return true;
  return guarded(text, [&] {
    const auto result = flowql::run(text, db_, opts_.exec);
    FormatOptions fo;
    fo.timing = opts_.timing;
    out_ << format_result(result, opts_.format, fo);
    if (result.truncated) out_ << "warning: query deadline reached, result truncated\n";
  });
}

bool Shell::explain(std::string_view text) {
  text = strip_semicolon(text);
  return guarded(text, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = flowql::plan(flowql::parse(text), db_, opts_.exec.plan);
    out_ << flowql::explain(p);
    if (opts_.timing) {
      out_ << "planned in "
           << std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()
           << " ms\n";
    }
  });
}

bool Shell::meta(std::string_view line) {
  const auto space = line.find_first_of(" \t");
  const std::string_view cmd = line.substr(0, space);
  const std::string_view arg = space == std::string_view::npos ? "" : trim(line.substr(space));
  if (cmd == "\\q" || cmd == "\\quit") {
    quit_ = true;
  } else if (cmd == "\\help" || cmd == "\\?") {
    out_ << kHelp;
  } else if (cmd == "\\timing") {
    if (arg.empty()) {
      opts_.timing = !opts_.timing;
    } else if (arg == "on" || arg == "off") {
      opts_.timing = arg == "on";
    } else {
      out_ << "usage: \\timing [on|off]\n";
      return true;
    }
    out_ << "timing is " << (opts_.timing ? "on" : "off") << '\n';
  } else if (cmd == "\\format") {
    if (auto f = parse_format(arg)) {
      opts_.format = *f;
      out_ << "output format is " << to_string(*f) << '\n';
    } else {
      out_ << "usage: \\format table|csv|json-lines|json\n";
    }
  } else if (cmd == "\\explain") {
    if (arg.empty()) {
      out_ << "usage: \\explain <query>\n";
    } else {
      explain(arg);
    }
  } else {
    out_ << "unknown command " << cmd << "; try \\help\n";
  }
  return !quit_;
}

bool Shell::feed(std::string_view line) {
  if (quit_) return false;
  const std::string_view t = trim(line);
  if (buffer_.empty()) {
    if (t.empty()) return true;
    if (t.front() == '\\') return meta(t);
  }
  if (!buffer_.empty()) buffer_ += '\n';
  buffer_ += line;
  if (!t.empty() && t.back() == ';') {
    const std::string stmt = std::move(buffer_);
    buffer_.clear();
    execute(stmt);
  }
  return true;
}

void Shell::finish() {
  if (buffer_.empty()) return;
  const std::string stmt = std::move(buffer_);
  buffer_.clear();
  execute(stmt);
}

void Shell::run(std::istream& in, bool interactive) {
  std::string line;
  while (!quit_) {
    if (interactive) out_ << (buffer_.empty() ? opts_.prompt : opts_.continuation) << std::flush;
    if (!std::getline(in, line)) break;
    if (!feed(line)) break;
  }
  if (!quit_) finish();
  if (interactive) out_ << '\n';
}

}  // namespace flowtree::service
