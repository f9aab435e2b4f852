// Copyright (c) the UGICM Authors
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

#ifndef UGICM_ERRORS_H_
#define UGICM_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ugicm {

// Machine-parsable error classes. The CLI prints the class name as the first
// token of its one-line error message.
enum class ErrorKind {
  kDimensionMismatch,
  kShapeMismatch,
  kDepthMismatch,
  kNumeric,
  kSymbolOutOfRange,
  kCorruptStream,
  kBadMagic,
  kVersionUnsupported,
  kLengthMismatch,
  kDigestMismatch,
  kCropOutOfBounds,
  kNonFiniteLoss,
  kFreezeViolation,
  kFrozenUninitialized,
  kInvalidConfig,
  kIo,
  kNotFound,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& message);

}  // namespace ugicm

#endif  // UGICM_ERRORS_H_
