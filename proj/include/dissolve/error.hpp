// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dissolve {

enum class ErrorCode {
  invalid_grid,
  no_boundary,
  index_out_of_bounds,
  unreachable_node,
  empty_design,
  singular_adjoint,
  invalid_target,
  invalid_config,
  dimension_mismatch,
  io_failure,
  sample_failure,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_grid: return "invalid-grid";
    case ErrorCode::no_boundary: return "no-boundary";
    case ErrorCode::index_out_of_bounds: return "index-out-of-bounds";
    case ErrorCode::unreachable_node: return "unreachable-node";
    case ErrorCode::empty_design: return "empty-design";
    case ErrorCode::singular_adjoint: return "singular-adjoint";
    case ErrorCode::invalid_target: return "invalid-target";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::sample_failure: return "sample-failure";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a stable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dissolve
