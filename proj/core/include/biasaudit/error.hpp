// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biasaudit {

enum class Errc {
  InvalidArgument,
  IoError,
  // tabular
  FileNotFound,
  EmptyFile,
  DuplicateHeader,
  ParseError,
  RaggedRow,
  UnknownColumn,
  AllRowsDropped,
  ConstantColumn,
  NonNumericalTarget,
  // metrics
  SingleCategory,
  DegenerateIQR,
  DegenerateTable,
  MissingMediator,
  SingletonGroup,
  ZeroVariance,
  InsufficientSamples,
  UnsupportedArity,
  // severity / synthgen
  UnknownMetric,
  PreconditionFailed,
  InvalidSpec,
  // methodlib
  SchemaError,
  UnknownId,
  DuplicateId,
  // orchestrator
  PlannerError,
  ToolError,
  NetworkError,
  EndOfInput,
  // reporting
  EmptyData,
  ArityMismatch,
  NoFindings,
  // bench
  EmptyRecords,
  MalformedLog,
  AllMetricsFailed,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace biasaudit
