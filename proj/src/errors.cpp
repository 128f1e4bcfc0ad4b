// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#include "polarkit/errors.hpp"

namespace polarkit {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::structural: return "structural";
    case ErrorKind::data: return "data";
    case ErrorKind::format: return "format";
    case ErrorKind::parse: return "parse";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::usage: return "usage";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::transport: return "transport";
    case ErrorKind::generation: return "generation";
    case ErrorKind::composition: return "composition";
    case ErrorKind::scoring: return "scoring";
    case ErrorKind::empty_evaluation: return "empty_evaluation";
  }
  return "unknown";
}

}  // namespace polarkit
