#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evidistill {

enum class ErrorCode {
  BackendUnavailable,
  Timeout,
  UndecodableImage,
  EmptyCaption,
  QuotaExceeded,
  NetworkFailure,
  OfflineMiss,
  EmptyQuery,
  EndpointFailure,
  BudgetExhausted,
  EmptyCompletion,
  LabelConflict,
  IdMismatch,
  EmptyInput,
  LengthMismatch,
  ClientUnavailable,
  ConfigInvalid,
  MissingInput,
  SchemaViolation,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evidistill
