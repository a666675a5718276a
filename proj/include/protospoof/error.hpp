// Copyright 2026 The protospoof Authors
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

namespace protospoof {

enum class ErrorKind {
  dimension,
  configuration,
  contract,
  format,
  corrupt_record,
  duplicate_id,
  validation,
  sampling,
  empty_support,
  degenerate_prototype,
  conditioning,
  numeric,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::contract: return "contract error";
    case ErrorKind::format: return "format error";
    case ErrorKind::corrupt_record: return "corrupt record";
    case ErrorKind::duplicate_id: return "duplicate id";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::sampling: return "sampling error";
    case ErrorKind::empty_support: return "empty support";
    case ErrorKind::degenerate_prototype: return "degenerate prototype";
    case ErrorKind::conditioning: return "conditioning error";
    case ErrorKind::numeric: return "numeric failure";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

/// Base of every error raised by the library. `kind()` lets callers map
/// failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindError : public Error {
 public:
  explicit KindError(const std::string& message) : Error(K, message) {}
};

using DimensionError = KindError<ErrorKind::dimension>;
using ConfigError = KindError<ErrorKind::configuration>;
using ContractError = KindError<ErrorKind::contract>;
using FormatError = KindError<ErrorKind::format>;
using CorruptRecordError = KindError<ErrorKind::corrupt_record>;
using DuplicateIdError = KindError<ErrorKind::duplicate_id>;
using ValidationError = KindError<ErrorKind::validation>;
using SamplingError = KindError<ErrorKind::sampling>;
using EmptySupportError = KindError<ErrorKind::empty_support>;
using DegeneratePrototypeError = KindError<ErrorKind::degenerate_prototype>;
using ConditioningError = KindError<ErrorKind::conditioning>;
using NumericError = KindError<ErrorKind::numeric>;
using IoError = KindError<ErrorKind::io>;

}  // namespace protospoof
