// Copyright 2026 The CAWS Planner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace caws {

enum class ErrorCode {
  kSingularIcm,
  kDegenerateBackward,
  kParseError,
  kValidationError,
  kNoPath,
  kInfeasible,
  kMaxIterations,
  kBadInitialGuess,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularIcm:
      return "SingularIcm";
    case ErrorCode::kDegenerateBackward:
      return "DegenerateBackward";
    case ErrorCode::kParseError:
      return "ParseError";
    case ErrorCode::kValidationError:
      return "ValidationError";
    case ErrorCode::kNoPath:
      return "NoPath";
    case ErrorCode::kInfeasible:
      return "Infeasible";
    case ErrorCode::kMaxIterations:
      return "MaxIterations";
    case ErrorCode::kBadInitialGuess:
      return "BadInitialGuess";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace caws
