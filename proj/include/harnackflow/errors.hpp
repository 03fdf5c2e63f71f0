#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace harnackflow {

enum class ErrorKind {
  ShapeMismatch,
  NonFinite,
  InvalidArgument,
  PositivityLost,
  Blowup,
  StepTooLarge,
  IndexAtBoundary,
  NonPositiveF,
  NonPositiveCurvature,
  FOutOfRange,
  DegenerateParams,
  VariantMismatch,
  TimesNotStored,
  NodesOutOfRange,
  Unreachable,
  SyntaxError,
  UnknownKey,
  ConstraintViolation,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::PositivityLost: return "PositivityLost";
    case ErrorKind::Blowup: return "Blowup";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::IndexAtBoundary: return "IndexAtBoundary";
    case ErrorKind::NonPositiveF: return "NonPositiveF";
    case ErrorKind::NonPositiveCurvature: return "NonPositiveCurvature";
    case ErrorKind::FOutOfRange: return "FOutOfRange";
    case ErrorKind::DegenerateParams: return "DegenerateParams";
    case ErrorKind::VariantMismatch: return "VariantMismatch";
    case ErrorKind::TimesNotStored: return "TimesNotStored";
    case ErrorKind::NodesOutOfRange: return "NodesOutOfRange";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this exception. The kind
/// is stable and meant for programmatic dispatch; the message is for humans.
/// Solver failures carry the simulation time at which they occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<double> time = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message),
        time_(time) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> time() const noexcept { return time_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::optional<double> time_;
};

}  // namespace harnackflow
