/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace nld {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  NonScalarRoot,
  LengthMismatch,
  NotConverged,
  CholeskyFailure,
  NonFinite,
  SingularDiffusion,
  TooManySkips,
  NonPositiveDefiniteHessian,
  UnassignedSample,
  DegeneratePoints,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; the C API maps `code` onto
// its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarRoot: return "NonScalarRoot";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::CholeskyFailure: return "CholeskyFailure";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularDiffusion: return "SingularDiffusion";
    case ErrorCode::TooManySkips: return "TooManySkips";
    case ErrorCode::NonPositiveDefiniteHessian: return "NonPositiveDefiniteHessian";
    case ErrorCode::UnassignedSample: return "UnassignedSample";
    case ErrorCode::DegeneratePoints: return "DegeneratePoints";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace nld
