#include "rostam/error.h"

namespace rostam {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kRng: return "rng";
    case ErrorCode::kEncoding: return "encoding";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kUnwrap: return "unwrap";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kAlreadyExists: return "already_exists";
    case ErrorCode::kRejected: return "rejected";
    case ErrorCode::kVerification: return "verification";
    case ErrorCode::kAuth: return "auth";
    case ErrorCode::kState: return "state";
    case ErrorCode::kGate: return "gate";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace rostam
