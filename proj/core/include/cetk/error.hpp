#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cetk {

enum class ErrorCode {
  MalformedHeader,
  DimensionMismatch,
  DuplicateToken,
  NonFiniteValue,
  EmptySentence,
  OverlappingSpans,
  OutOfBounds,
  EmptyClass,
  InsufficientData,
  LengthMismatch,
  EmptyBatch,
  EmptyDataset,
  UnknownLabel,
  EmptyMatrix,
  EmptyInput,
  EmptyPool,
  UnknownItem,
  AlreadyResolved,
  QueueNotEmpty,
  EmptySeed,
  EmptyPhrase,
  UnresolvedCluster,
  UnknownCluster,
  IoError,
  ParseError,
  MissingModel,
  PortInUse,
  StoreLocked,
  SchemaError,
};

std::string_view error_code_name(ErrorCode code);

/// Exception type for every recoverable failure in the toolkit. Carries a
/// machine-readable code and, for file parsers, the 1-based line number.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  /// The message without the code and line decoration.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

}  // namespace cetk
