#pragma once

#include <stdexcept>
#include <string>

namespace misconception {

/// Failure categories; each maps onto one CLI exit code.
enum class ErrorKind {
  kParse,
  kDimensionMismatch,
  kInvalidConfig,
  kEnumerationTooLarge,
  kEmptyAfterTrim,
  kMissingFeature,
  kTooFewCells,
  kShapeMismatch,
  kSingleClass,
  kEmptyInput,
  kCholeskyFailure,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kEnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorKind::kEmptyAfterTrim: return "EmptyAfterTrim";
    case ErrorKind::kMissingFeature: return "MissingFeature";
    case ErrorKind::kTooFewCells: return "TooFewCells";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kSingleClass: return "SingleClass";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kCholeskyFailure: return "CholeskyFailure";
  }
  return "Error";
}

/// 2 = config/parse, 3 = data shape, 4 = numerical.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse:
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kEnumerationTooLarge:
      return 2;
    case ErrorKind::kEmptyAfterTrim:
    case ErrorKind::kMissingFeature:
    case ErrorKind::kTooFewCells:
    case ErrorKind::kShapeMismatch:
    case ErrorKind::kSingleClass:
    case ErrorKind::kEmptyInput:
      return 3;
    case ErrorKind::kCholeskyFailure:
      return 4;
  }
  return 1;
}

}  // namespace misconception
