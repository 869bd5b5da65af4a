#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentrec {

// Stable machine-readable error codes. The string form is what the HTTP
// service and CLI report to clients.
enum class ErrorCode {
  invalid_input,
  invalid_embedding,
  invalid_prompt,
  invalid_configuration,
  contract_violation,
  provider_error,
  generation_error,
  build_error,
  io_error,
  bad_magic,
  unsupported_version,
  truncated,
  norm_violation,
  checksum_mismatch,
  numerical_error,
  not_found,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace agentrec
