#include "radkit/error.hpp"

namespace radkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::inconsistent_dims: return "inconsistent-dims";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::truncated_payload: return "truncated-payload";
    case ErrorCode::malformed_json: return "malformed-json";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::stage_violation: return "stage-violation";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::zero_variance: return "zero-variance";
    case ErrorCode::window_too_large: return "window-too-large";
    case ErrorCode::domain_violation: return "domain-violation";
    case ErrorCode::rank_deficient: return "rank-deficient";
    case ErrorCode::insufficient_boxes: return "insufficient-boxes";
    case ErrorCode::class_list_mismatch: return "class-list-mismatch";
    case ErrorCode::negative_size: return "negative-size";
  }
  return "unknown";
}

}  // namespace radkit
