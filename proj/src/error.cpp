#include "evidistill/error.hpp"

namespace evidistill {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::UndecodableImage: return "UndecodableImage";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::QuotaExceeded: return "QuotaExceeded";
    case ErrorCode::NetworkFailure: return "NetworkFailure";
    case ErrorCode::OfflineMiss: return "OfflineMiss";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::EndpointFailure: return "EndpointFailure";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::EmptyCompletion: return "EmptyCompletion";
    case ErrorCode::LabelConflict: return "LabelConflict";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ClientUnavailable: return "ClientUnavailable";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace evidistill
