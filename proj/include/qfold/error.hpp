// Copyright 2026 The qfold Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfold {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  MissingChain,
  EmptyStructure,
  EmptyContacts,
  DuplicateContact,
  DimensionMismatch,
  NonFinite,
  InvalidState,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::MissingChain: return "missing chain";
    case ErrorCode::EmptyStructure: return "empty structure";
    case ErrorCode::EmptyContacts: return "empty contact set";
    case ErrorCode::DuplicateContact: return "duplicate contact";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::InvalidState: return "invalid state";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Config: return "configuration error";
  }
  return "error";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map them onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qfold
