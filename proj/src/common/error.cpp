#include "common/error.hpp"

namespace modeladapt {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parse: return "ParseError";
    case ErrorCode::model: return "ModelError";
    case ErrorCode::resolution: return "ResolutionError";
    case ErrorCode::plan: return "PlanError";
    case ErrorCode::constraint: return "ConstraintError";
    case ErrorCode::rights: return "RightsError";
    case ErrorCode::not_found: return "NotFound";
    case ErrorCode::io: return "IoError";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::unauthorized: return "Unauthorized";
  }
  return "Error";
}

}  // namespace modeladapt
