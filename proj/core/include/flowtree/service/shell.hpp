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
// Interactive FlowQL read-eval-print loop.
//
// A statement runs once a line ends with ';' (a lone query line without
// ';' also runs when the input ends). Lines starting with '\' are meta
// commands and are accepted only between statements.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "flowtree/flowql/execute.hpp"
#include "flowtree/service/format.hpp"

namespace flowtree {
class FlowDB;
}

namespace flowtree::service {

struct ShellOptions {
  OutputFormat format = OutputFormat::kTable;
  bool timing = false;
  flowql::ExecOptions exec;
  std::string prompt = "flowql> ";
  std::string continuation = "   ...> ";
};

class Shell {
 public:
  Shell(FlowDB& db, std::ostream& out, ShellOptions opts = {});

  /// Consumes one input line; false once the session asked to quit.
  bool feed(std::string_view line);
  /// Runs any buffered statement, as at end of input.
  void finish();
  /// Reads lines until end of input or \quit, printing prompts when
  /// `interactive`.
  void run(std::istream& in, bool interactive);

  /// Executes one statement and prints its result or error. Returns false
  /// on error.
  bool execute(std::string_view text);
  bool explain(std::string_view text);

  const ShellOptions& options() const { return opts_; }
  bool pending() const { return !buffer_.empty(); }

 private:
  bool meta(std::string_view line);
  template <typename F>
  bool guarded(std::string_view text, F&& f);

  FlowDB& db_;
  std::ostream& out_;
  ShellOptions opts_;
  std::string buffer_;
  bool quit_ = false;
};

}  // namespace flowtree::service
