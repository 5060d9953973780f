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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowtree {

enum class ErrorCode {
  kInvalidMask,
  kInvalidKey,
  kNoParent,
  kFeatureSetMismatch,
  kRootDeletion,
  kKeyNotFound,
  kCounterOverflow,
  kInvalidArgument,
  kDecode,
  kFormat,
  kIngestQuality,
  kWindow,
  kKeyMismatch,
  kStorage,
  kNotFound,
  kSyntax,
  kSemantic,
};

std::string_view to_string(ErrorCode code);

/// Base of every error thrown by the library. `code()` identifies the
/// contract violation independently of the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define FLOWTREE_DEFINE_ERROR(Name, Code)                         \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Code, what) {} \
  }

FLOWTREE_DEFINE_ERROR(InvalidMask, ErrorCode::kInvalidMask);
FLOWTREE_DEFINE_ERROR(InvalidKey, ErrorCode::kInvalidKey);
FLOWTREE_DEFINE_ERROR(NoParent, ErrorCode::kNoParent);
FLOWTREE_DEFINE_ERROR(FeatureSetMismatch, ErrorCode::kFeatureSetMismatch);
FLOWTREE_DEFINE_ERROR(RootDeletion, ErrorCode::kRootDeletion);
FLOWTREE_DEFINE_ERROR(KeyNotFound, ErrorCode::kKeyNotFound);
FLOWTREE_DEFINE_ERROR(CounterOverflow, ErrorCode::kCounterOverflow);
FLOWTREE_DEFINE_ERROR(InvalidArgument, ErrorCode::kInvalidArgument);
FLOWTREE_DEFINE_ERROR(FormatError, ErrorCode::kFormat);
FLOWTREE_DEFINE_ERROR(IngestQualityError, ErrorCode::kIngestQuality);
FLOWTREE_DEFINE_ERROR(WindowError, ErrorCode::kWindow);
FLOWTREE_DEFINE_ERROR(KeyMismatch, ErrorCode::kKeyMismatch);
FLOWTREE_DEFINE_ERROR(StorageError, ErrorCode::kStorage);
FLOWTREE_DEFINE_ERROR(NotFound, ErrorCode::kNotFound);
FLOWTREE_DEFINE_ERROR(SemanticError, ErrorCode::kSemantic);

#undef FLOWTREE_DEFINE_ERROR

enum class DecodeErrorKind {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kChecksumMismatch,
  kMalformed,
};

std::string_view to_string(DecodeErrorKind kind);

class DecodeError : public Error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : Error(ErrorCode::kDecode, what), kind_(kind) {}

  DecodeErrorKind kind() const noexcept { return kind_; }

 private:
  DecodeErrorKind kind_;
};

/// Query text error with a 1-based position of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t line, std::size_t column,
              std::string token)
      : Error(ErrorCode::kSyntax, what),
        line_(line),
        column_(column),
        token_(std::move(token)) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& token() const noexcept { return token_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string token_;
};

}  // namespace flowtree
