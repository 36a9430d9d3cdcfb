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

#include "pathlens/error.h"

#include <utility>

namespace pathlens {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kInvariantViolation: return "invariant_violation";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kNumeric: return "numeric";
  }
  return "unknown";
}

namespace {

std::string Compose(ErrorCode code, const std::string& message,
                    const std::string& context) {
  std::string out(ErrorCodeName(code));
  out += ": ";
  if (!context.empty()) {
    out += "[" + context + "] ";
  }
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string message, std::string context)
    : std::runtime_error(Compose(code, message, context)),
      code_(code),
      message_(std::move(message)),
      context_(std::move(context)) {}

void Fail(ErrorCode code, std::string message, std::string context) {
  throw Error(code, std::move(message), std::move(context));
}

}  // namespace pathlens
