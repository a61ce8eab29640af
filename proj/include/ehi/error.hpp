#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ehi {

enum class ErrorCode {
  invalid_argument,
  parse,
  duplicate_id,
  missing_files,
  io,
  config,
  missing_prerequisite,
  modality_missing,
  runtime,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ehi
