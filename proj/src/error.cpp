#include "agentrec/error.hpp"

namespace agentrec {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::invalid_embedding: return "invalid_embedding";
    case ErrorCode::invalid_prompt: return "invalid_prompt";
    case ErrorCode::invalid_configuration: return "invalid_configuration";
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::provider_error: return "provider_error";
    case ErrorCode::generation_error: return "generation_error";
    case ErrorCode::build_error: return "build_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::unsupported_version: return "unsupported_version";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::norm_violation: return "norm_violation";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::numerical_error: return "numerical_error";
    case ErrorCode::not_found: return "not_found";
  }
  return "unknown";
}

}  // namespace agentrec
