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

#ifndef UGICM_ARCHIVE_H_
#define UGICM_ARCHIVE_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ugicm/tensor.h"

namespace ugicm {

// Named tensors plus a free-form JSON metadata string.
//
// File layout (little-endian):
//   "UGTA" | u32 version | u64 metadata length | metadata bytes | u64 count |
//   per tensor: u32 name length | name | u8 dtype (0 = f64, 1 = f32) |
//               4 x i32 shape (n, c, h, w) | values |
//   u64 FNV-1a digest of everything before it
struct TensorArchive {
  std::string metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* Find(const std::string& name) const;
  // Throws kNotFound.
  const Tensor& Get(const std::string& name) const;
};

enum class StorageType : uint8_t { kFloat64 = 0, kFloat32 = 1 };

std::vector<uint8_t> SerializeArchive(const TensorArchive& archive,
                                      StorageType type = StorageType::kFloat64);
// Throws kBadMagic, kVersionUnsupported, kCorruptStream or kDigestMismatch.
TensorArchive ParseArchive(const std::vector<uint8_t>& bytes);

void WriteArchive(const std::string& path, const TensorArchive& archive,
                  StorageType type = StorageType::kFloat64);
TensorArchive ReadArchive(const std::string& path);

// Whole-file helpers; throw kIo.
std::vector<uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace ugicm

#endif  // UGICM_ARCHIVE_H_
