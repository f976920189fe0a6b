// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace metriccam {

enum class ErrorCode {
  kOk = 0,
  kDomain = 1,
  kDegenerate = 2,
  kIo = 3,
  kParse = 4,
  kState = 5,
  kSingular = 6,
  kDiverged = 7,
  kInvalidArgument = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Input outside the mathematical domain of an operation (non-positive focal,
// out-of-bounds crop, anisotropy beyond tolerance, ...).
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorCode::kDomain, w) {}
};

// Not enough valid data to evaluate (too few pixels, no accepted triplets).
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& w)
      : Error(ErrorCode::kDegenerate, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::kIo, w) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorCode::kParse, w) {}
};

struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorCode::kState, w) {}
};

struct SingularError : Error {
  explicit SingularError(const std::string& w)
      : Error(ErrorCode::kSingular, w) {}
};

// Training produced a non-finite loss. Carries the iteration index.
struct DivergenceError : Error {
  DivergenceError(const std::string& w, long iteration)
      : Error(ErrorCode::kDiverged, w), iteration(iteration) {}
  long iteration;
};

// Non-fatal diagnostics (e.g. "no plane pixels, pwn skipped") are routed here.
// Default sink writes to stderr; tests may swap it out.
using WarningSink = void (*)(const std::string&);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace metriccam
