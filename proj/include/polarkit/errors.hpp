// Copyright 2026 The Polarkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef POLARKIT_ERRORS_HPP
#define POLARKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace polarkit {

/// Coarse error families. Each maps onto one process exit code in the CLI.
enum class ErrorKind {
  structural,   // mismatched dimensions, malformed shapes
  data,         // non-finite samples, out-of-range values
  format,       // malformed files, RLE run-sum mismatch, bad polygons
  parse,        // malformed structured text
  integrity,    // dangling references between records
  usage,        // bad flags, missing templates, stage/batch mismatch
  degenerate,   // empty masks, zero-variance channels, zero attention mass
  transport,    // client exhausted retries
  generation,   // empty model response
  composition,  // infeasible split targets
  scoring,      // unparseable judge output
  empty_evaluation,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace polarkit

#endif  // POLARKIT_ERRORS_HPP
