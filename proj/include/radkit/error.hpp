#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radkit {

enum class ErrorCode {
  io_failure,
  inconsistent_dims,
  bad_magic,
  truncated_payload,
  malformed_json,
  invariant_violation,
  shape_mismatch,
  stage_violation,
  empty_dataset,
  zero_variance,
  window_too_large,
  domain_violation,
  rank_deficient,
  insufficient_boxes,
  class_list_mismatch,
  negative_size,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace radkit
