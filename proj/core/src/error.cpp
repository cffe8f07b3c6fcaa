#include "cetk/error.hpp"

namespace cetk {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateToken: return "DuplicateToken";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptySentence: return "EmptySentence";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::QueueNotEmpty: return "QueueNotEmpty";
    case ErrorCode::EmptySeed: return "EmptySeed";
    case ErrorCode::EmptyPhrase: return "EmptyPhrase";
    case ErrorCode::UnresolvedCluster: return "UnresolvedCluster";
    case ErrorCode::UnknownCluster: return "UnknownCluster";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::StoreLocked: return "StoreLocked";
    case ErrorCode::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::size_t> line) {
  std::string out(error_code_name(code));
  if (line) out += "(line " + std::to_string(*line) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> line)
    : std::runtime_error(format_message(code, message, line)),
      code_(code),
      line_(line),
      detail_(message) {}

}  // namespace cetk
