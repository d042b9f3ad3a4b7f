#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace arl {

enum class ErrorKind {
  UnknownStateAction,
  CapExceeded,
  InvalidAlpha,
  TerminationCapExceeded,
  SingularSystem,
  AbsContinuityViolation,
  NonFiniteState,
  NotWeaklyCommunicating,
  ConfigError,
  ModelError,
  InvalidBehavior,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers can branch
/// on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::UnknownStateAction: return "UnknownStateAction";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::TerminationCapExceeded: return "TerminationCapExceeded";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::AbsContinuityViolation: return "AbsContinuityViolation";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::NotWeaklyCommunicating: return "NotWeaklyCommunicating";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ModelError: return "ModelError";
    case ErrorKind::InvalidBehavior: return "InvalidBehavior";
  }
  return "Unknown";
}

}  // namespace arl
