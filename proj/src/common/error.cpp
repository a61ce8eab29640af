#include "ehi/error.hpp"

namespace ehi {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse: return "parse";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::missing_files: return "missing_files";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    case ErrorCode::missing_prerequisite: return "missing_prerequisite";
    case ErrorCode::modality_missing: return "modality_missing";
    case ErrorCode::runtime: return "runtime";
  }
  return "unknown";
}

}  // namespace ehi
