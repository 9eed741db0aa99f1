// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/error.hpp"

namespace biasaudit {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::DuplicateHeader: return "DuplicateHeader";
    case Errc::ParseError: return "ParseError";
    case Errc::RaggedRow: return "RaggedRow";
    case Errc::UnknownColumn: return "UnknownColumn";
    case Errc::AllRowsDropped: return "AllRowsDropped";
    case Errc::ConstantColumn: return "ConstantColumn";
    case Errc::NonNumericalTarget: return "NonNumericalTarget";
    case Errc::SingleCategory: return "SingleCategory";
    case Errc::DegenerateIQR: return "DegenerateIQR";
    case Errc::DegenerateTable: return "DegenerateTable";
    case Errc::MissingMediator: return "MissingMediator";
    case Errc::SingletonGroup: return "SingletonGroup";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::UnsupportedArity: return "UnsupportedArity";
    case Errc::UnknownMetric: return "UnknownMetric";
    case Errc::PreconditionFailed: return "PreconditionFailed";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::SchemaError: return "SchemaError";
    case Errc::UnknownId: return "UnknownId";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::PlannerError: return "PlannerError";
    case Errc::ToolError: return "ToolError";
    case Errc::NetworkError: return "NetworkError";
    case Errc::EndOfInput: return "EndOfInput";
    case Errc::EmptyData: return "EmptyData";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::NoFindings: return "NoFindings";
    case Errc::EmptyRecords: return "EmptyRecords";
    case Errc::MalformedLog: return "MalformedLog";
    case Errc::AllMetricsFailed: return "AllMetricsFailed";
  }
  return "Unknown";
}

}  // namespace biasaudit
