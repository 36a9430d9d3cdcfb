// Copyright 2026 The pathlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PATHLENS_ERROR_H_
#define PATHLENS_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathlens {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kOutOfRange,
  kInvariantViolation,
  kNotFound,
  kIo,
  kFormat,
  kNumeric,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures surface as this exception. `context` names the
// offending object (usually a layer id) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string context = {});

  ErrorCode code() const { return code_; }
  const std::string& context() const { return context_; }
  const std::string& message() const { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string context_;
};

[[noreturn]] void Fail(ErrorCode code, std::string message,
                       std::string context = {});

inline void Require(bool condition, ErrorCode code, std::string_view message,
                    std::string_view context = {}) {
  if (!condition) Fail(code, std::string(message), std::string(context));
}

}  // namespace pathlens

#endif  // PATHLENS_ERROR_H_
