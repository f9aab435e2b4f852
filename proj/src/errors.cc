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

#include "ugicm/errors.h"

namespace ugicm {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kDepthMismatch: return "depth-mismatch";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kSymbolOutOfRange: return "symbol-out-of-range";
    case ErrorKind::kCorruptStream: return "corrupt-stream";
    case ErrorKind::kBadMagic: return "bad-magic";
    case ErrorKind::kVersionUnsupported: return "version-unsupported";
    case ErrorKind::kLengthMismatch: return "length-mismatch";
    case ErrorKind::kDigestMismatch: return "digest-mismatch";
    case ErrorKind::kCropOutOfBounds: return "crop-out-of-bounds";
    case ErrorKind::kNonFiniteLoss: return "non-finite-loss";
    case ErrorKind::kFreezeViolation: return "freeze-violation";
    case ErrorKind::kFrozenUninitialized: return "frozen-uninitialized";
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNotFound: return "not-found";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ugicm
